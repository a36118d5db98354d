#include "radap/attack/attack.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "radap/core/parallel.hpp"
#include "radap/core/pnm.hpp"
#include "radap/nn/convert.hpp"

namespace radap::attack {

void AttackSpec::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("attack: alpha must be > 0");
  if (!(epsilon > 0.0)) throw ConfigError("attack: epsilon must be > 0");
  if (alpha > epsilon) throw ConfigError("attack: alpha must not exceed epsilon");
  if (steps < 0) throw ConfigError("attack: steps must be >= 0");
  mask.check_binary();
  if (mask.height() != source.height() || mask.width() != source.width())
    throw ShapeError("attack: mask shape does not match the source image");
  if (system == models::Mode::closed_set) {
    if (label_source < 0 && goal == Goal::evasion)
      throw ConfigError("attack: closed-set evasion requires label_source");
    if (goal == Goal::impersonation && label_target < 0)
      throw ConfigError("attack: closed-set impersonation requires label_target");
  } else if (goal == Goal::impersonation && !target.has_value()) {
    throw ConfigError("attack: open-set impersonation requires a target image");
  }
  if (adaptive && !(sigmoid_temperature > 0.0))
    throw ConfigError("attack: sigmoid_temperature must be > 0");
}

double sigmoid_surrogate(double p, double temperature) {
  return 1.0 / (1.0 + std::exp(-temperature * (p - 0.5)));
}

double sigmoid_surrogate_gradient(double p, double temperature) {
  const double s = sigmoid_surrogate(p, temperature);
  return temperature * s * (1.0 - s);
}

namespace {

nn::NodeRef bpda_binarize(const nn::NodeRef& probs, double temperature) {
  return nn::custom_unary(
      probs,
      [](const nn::Tensor& p) {
        nn::Tensor out = p;
        for (int i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.5 ? 1.0 : 0.0;
        return out;
      },
      [temperature](const nn::Tensor& p, const nn::Tensor& gout) {
        nn::Tensor gin = p;
        for (int i = 0; i < gin.numel(); ++i)
          gin[i] = gout[i] * sigmoid_surrogate_gradient(p[i], temperature);
        return gin;
      });
}

nn::NodeRef saf_straight_through(const nn::NodeRef& mask, int subgrid_count) {
  return nn::custom_unary(
      mask,
      [subgrid_count](const nn::Tensor& m) {
        const int h = m.dim(2), w = m.dim(3);
        BinaryMask bm;
        bm.values = IntField(h, w);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) bm.values(y, x) = m[y * w + x] > 0.5 ? 1 : 0;
        const BinaryMask filled = defense::saf_padded(bm, subgrid_count);
        nn::Tensor out = m;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) out[y * w + x] = static_cast<double>(filled.values(y, x));
        return out;
      },
      [](const nn::Tensor&, const nn::Tensor& gout) { return gout; });
}

// Objective maximized by the PGD ascent (Table 2 with impersonation folded in
// as the negated objective).
nn::NodeRef build_objective(const nn::NodeRef& x_input, const AttackSpec& spec,
                            const models::RecognitionModel& model,
                            const defense::DefensePipeline* defense,
                            const Eigen::VectorXd* reference_embedding) {
  nn::NodeRef fr_input = x_input;
  if (defense != nullptr) {
    auto prob_map = nn::sigmoid(defense->segmenter->net().logits_map(x_input));
    auto mask = bpda_binarize(prob_map, spec.sigmoid_temperature);
    if (defense->saf) mask = saf_straight_through(mask, defense->saf->subgrid_count);
    fr_input = nn::occlude(x_input, mask, defense->fill_value);
  }

  if (spec.system == models::Mode::closed_set) {
    auto logits = model.net().logits(fr_input);
    if (spec.goal == Goal::evasion)
      return nn::softmax_cross_entropy(logits, {spec.label_source});
    return nn::scale(nn::softmax_cross_entropy(logits, {spec.label_target}), -1.0);
  }

  auto features = model.net().features(fr_input);
  nn::Tensor ref({static_cast<int>(reference_embedding->size())});
  for (int i = 0; i < ref.numel(); ++i) ref[i] = (*reference_embedding)(i);
  auto cos = nn::cosine_to(features, ref);
  double sign = spec.goal == Goal::evasion ? -1.0 : 1.0;
  if (spec.paper_literal_sign) sign = -sign;
  return nn::scale(cos, sign);
}

}  // namespace

Image pgd_patch_attack(const AttackSpec& spec, const models::RecognitionModel& target_model,
                       const defense::DefensePipeline* defense, AttackTrace* trace) {
  spec.validate();
  if (defense != nullptr) {
    defense->validate();
    if (!spec.adaptive)
      throw SurrogateRequiredError(
          "attack: the defended pipeline is non-differentiable; enable the adaptive "
          "(BPDA) surrogate to attack through it");
  }

  Eigen::VectorXd reference;
  if (spec.system == models::Mode::open_set) {
    reference = spec.goal == Goal::evasion ? target_model.embed(spec.source)
                                           : target_model.embed(*spec.target);
  }

  const int h = spec.source.height();
  const int w = spec.source.width();
  const nn::Tensor x_source = nn::tensor_from_image(spec.source);
  nn::Tensor x_current = x_source;

  // channel-broadcast mask and per-pixel projection bounds
  std::vector<double> mask_flat(static_cast<std::size_t>(3 * h * w));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        mask_flat[static_cast<std::size_t>((c * h + y) * w + x)] =
            static_cast<double>(spec.mask.values(y, x));

  for (int t = 0; t <= spec.steps; ++t) {
    auto x_node = nn::make_leaf(x_current, true);
    auto objective =
        build_objective(x_node, spec, target_model, defense, reference.size() ? &reference : nullptr);
    if (t == 0 && trace) trace->objective_start = objective->value[0];
    if (t == spec.steps) {
      if (trace) trace->objective_end = objective->value[0];
      break;
    }
    nn::backward(objective);

    for (int i = 0; i < x_current.numel(); ++i) {
      if (mask_flat[static_cast<std::size_t>(i)] == 0.0) continue;
      const double g = x_node->grad[i];
      const double step = spec.alpha * (g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0));
      double v = x_current[i] + step;
      v = std::clamp(v, std::max(0.0, x_source[i] - spec.epsilon),
                     std::min(1.0, x_source[i] + spec.epsilon));
      x_current[i] = v;
    }
    // patch confinement, exact
    for (int i = 0; i < x_current.numel(); ++i)
      if (mask_flat[static_cast<std::size_t>(i)] == 0.0) x_current[i] = x_source[i];
  }

  return nn::image_from_tensor(x_current);
}

Image bpda_adaptive_attack(const AttackSpec& spec, const defense::DefensePipeline& defense,
                           AttackTrace* trace) {
  if (!spec.adaptive) throw ConfigError("bpda_adaptive_attack: spec.adaptive must be set");
  return pgd_patch_attack(spec, *defense.fr_model, &defense, trace);
}

std::vector<FPatchSample> generate_fpatch_dataset(const data::Dataset& clean,
                                                  const models::RecognitionModel& fr_model,
                                                  const FPatchConfig& config, int count,
                                                  core::Rng& rng, int threads) {
  if (fr_model.mode() != models::Mode::closed_set)
    throw ConfigError("generate_fpatch_dataset: requires a closed-set model");
  if (clean.images.empty()) throw DataError("generate_fpatch_dataset: empty dataset");
  if (count < 0) throw ParameterError("generate_fpatch_dataset: count must be >= 0");
  {
    // mask height and width come from each source image
    fmask::FMaskConfig sized = config.fmask;
    sized.height = std::max(sized.height, 1);
    sized.width = std::max(sized.width, 1);
    sized.validate();
  }
  if (config.t_max < 1) throw ConfigError("generate_fpatch_dataset: t_max must be >= 1");

  const std::uint64_t base_seed = rng.next_u64();
  std::vector<FPatchSample> samples(static_cast<std::size_t>(count));
  core::parallel_for(
      count,
      [&](int i) {
        const std::uint64_t seed = core::derive_seed(base_seed, static_cast<std::uint64_t>(i));
        core::Rng local(seed);
        const int idx = local.uniform_int(0, static_cast<int>(clean.images.size()) - 1);
        const Image& source = clean.images[static_cast<std::size_t>(idx)];

        fmask::FMaskConfig mask_cfg = config.fmask;
        mask_cfg.height = source.height();
        mask_cfg.width = source.width();
        const fmask::FMaskDraw draw = fmask::sample_fmask_detailed(mask_cfg, local);

        AttackSpec spec;
        spec.system = models::Mode::closed_set;
        spec.goal = Goal::evasion;
        spec.mask = draw.mask;
        spec.alpha = config.alpha;
        spec.epsilon = config.epsilon;
        spec.steps = local.uniform_int(1, config.t_max);
        spec.source = source;
        spec.label_source = clean.labels[static_cast<std::size_t>(idx)];

        FPatchSample& sample = samples[static_cast<std::size_t>(i)];
        sample.attacked = pgd_patch_attack(spec, fr_model);
        sample.source = source;
        sample.mask = draw.mask;
        sample.label = spec.label_source;
        sample.steps_drawn = spec.steps;
        sample.lambda = draw.lambda;
        sample.seed = seed;
      },
      threads);
  return samples;
}

std::vector<segmenter::SegSample> to_seg_samples(const std::vector<FPatchSample>& samples) {
  std::vector<segmenter::SegSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.attacked, s.mask});
  return out;
}

void save_fpatch_dataset(const std::vector<FPatchSample>& samples,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu", i);
    core::write_ppm(dir / (std::string(name) + ".ppm"), samples[i].attacked);
    core::write_ppm(dir / (std::string(name) + "_src.ppm"), samples[i].source);
    core::write_mask_pgm(dir / (std::string(name) + "_mask.pgm"), samples[i].mask);
    manifest.push_back({{"index", i},
                        {"label", samples[i].label},
                        {"steps", samples[i].steps_drawn},
                        {"lambda", samples[i].lambda},
                        {"seed", samples[i].seed}});
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("cannot write fpatch manifest in " + dir.string());
}

std::vector<FPatchSample> load_fpatch_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DependencyError("fpatch manifest missing in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  std::vector<FPatchSample> samples;
  samples.reserve(manifest.size());
  for (const auto& entry : manifest) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu", entry.at("index").get<std::size_t>());
    FPatchSample s;
    s.attacked = core::read_ppm(dir / (std::string(name) + ".ppm"));
    s.source = core::read_ppm(dir / (std::string(name) + "_src.ppm"));
    s.mask = core::read_mask_pgm(dir / (std::string(name) + "_mask.pgm"), MaskOrigin::fmask);
    s.label = entry.at("label").get<int>();
    s.steps_drawn = entry.at("steps").get<int>();
    s.lambda = entry.at("lambda").get<double>();
    s.seed = entry.at("seed").get<std::uint64_t>();
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace radap::attack
