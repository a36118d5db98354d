#include "radap/evalkit/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "radap/core/fingerprint.hpp"
#include "radap/core/parallel.hpp"

namespace radap::evalkit {

std::string MaskSpecCfg::label() const {
  switch (kind) {
    case MaskKind::glasses:
      return "glasses";
    case MaskKind::sticker:
      return "sticker";
    case MaskKind::respirator:
      return "respirator";
    case MaskKind::rmask:
      return "rmask";
    case MaskKind::fmask:
      return "fmask";
  }
  return "?";
}

std::string AttackCfg::label() const {
  switch (kind) {
    case AttackKind::clean:
      return "clean";
    case AttackKind::pgd:
      return goal == attack::Goal::evasion ? "pgd" : "pgd-impersonation";
    case AttackKind::bpda:
      return "bpda";
  }
  return "?";
}

std::string DefenseCfg::label() const {
  switch (kind) {
    case DefenseKind::undefended:
      return "undefended";
    case DefenseKind::gt:
      return "gt";
    case DefenseKind::ours_minus:
      return "ours-";
    case DefenseKind::ours_plus: {
      std::ostringstream os;
      os << "ours+(n=" << saf_n << ")";
      return os.str();
    }
  }
  return "?";
}

void ExperimentGrid::validate() const {
  if (defenses.empty() || masks.empty() || attacks.empty())
    throw ConfigError("grid: every axis must be nonempty");
  if (images_per_cell <= 0) throw ConfigError("grid: images_per_cell must be positive");
}

const CellResult* EvaluationReport::find(const std::string& defense, const std::string& mask,
                                         const std::string& attack) const {
  for (const auto& c : cells)
    if (c.defense == defense && c.mask == mask && c.attack == attack) return &c;
  return nullptr;
}

double closed_set_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw ShapeError("closed_set_accuracy: prediction/label size mismatch");
  if (predictions.empty()) throw DataError("closed_set_accuracy: empty sample set");
  long correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double closed_set_accuracy(const models::RecognitionModel& model, const data::Dataset& data) {
  if (data.images.empty()) throw DataError("closed_set_accuracy: empty dataset");
  std::vector<int> preds(data.images.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < data.images.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, data.images.size() - start);
    const Eigen::MatrixXd probs =
        model.predict_probs_batch(std::span<const Image>(data.images.data() + start, n));
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index arg = 0;
      probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
      preds[start + i] = static_cast<int>(arg);
    }
  }
  return closed_set_accuracy(preds, data.labels);
}

double open_set_tar_at_far(std::span<const double> genuine_similarities,
                           std::span<const double> impostor_similarities, double far) {
  if (genuine_similarities.empty()) throw DataError("open_set_tar_at_far: no genuine pairs");
  const models::SimilarityThreshold t = models::calibrate_threshold(impostor_similarities, far);
  long accepted = 0;
  for (double s : genuine_similarities)
    if (s > t.value) ++accepted;
  return 100.0 * static_cast<double>(accepted) /
         static_cast<double>(genuine_similarities.size());
}

namespace {

std::uint64_t cell_fingerprint(const ExperimentGrid& grid, const DefenseCfg& d,
                               const MaskSpecCfg& m, const AttackCfg& a) {
  std::ostringstream os;
  os << d.label() << '|' << d.fill << '|' << m.label() << '|' << m.fmask_delta << '|'
     << m.fmask_area_min << '|' << m.fmask_area_max << '|' << a.label() << '|' << a.alpha << '|'
     << a.epsilon << '|' << a.steps << '|' << a.sigmoid_temperature << '|' << grid.seed << '|'
     << grid.images_per_cell;
  return core::fnv1a64(os.str());
}

BinaryMask instantiate_mask(const MaskSpecCfg& cfg, int h, int w, core::Rng& rng,
                            const std::filesystem::path& stencil_dir) {
  switch (cfg.kind) {
    case MaskKind::glasses:
      return fmask::load_predefined_mask(fmask::PredefinedMask::glasses, h, w, stencil_dir);
    case MaskKind::sticker:
      return fmask::load_predefined_mask(fmask::PredefinedMask::sticker, h, w, stencil_dir);
    case MaskKind::respirator:
      return fmask::load_predefined_mask(fmask::PredefinedMask::respirator, h, w, stencil_dir);
    case MaskKind::rmask:
      return fmask::sample_rmask_default(h, w, rng);
    case MaskKind::fmask: {
      fmask::FMaskConfig fc;
      fc.height = h;
      fc.width = w;
      fc.decay_power = cfg.fmask_delta;
      fc.area_min = cfg.fmask_area_min;
      fc.area_max = cfg.fmask_area_max;
      return fmask::sample_fmask(fc, rng);
    }
  }
  throw ConfigError("instantiate_mask: unknown mask kind");
}

struct CellRunner {
  const ExperimentGrid& grid;
  const GridContext& ctx;

  CellResult run(int cell_index, const DefenseCfg& dcfg, const MaskSpecCfg& mcfg,
                 const AttackCfg& acfg) const {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t cell_seed = core::derive_seed(grid.seed, static_cast<std::uint64_t>(cell_index));

    const data::Dataset& test = *ctx.testset;
    const int n = std::min<int>(grid.images_per_cell, static_cast<int>(test.images.size()));

    defense::DefensePipeline pipeline;
    pipeline.segmenter = ctx.seg;
    pipeline.fr_model = ctx.fr;
    pipeline.fill_value = dcfg.fill;
    if (dcfg.kind == DefenseKind::ours_plus) pipeline.saf = defense::SafConfig{dcfg.saf_n, {}};
    const bool needs_segmenter =
        dcfg.kind == DefenseKind::ours_minus || dcfg.kind == DefenseKind::ours_plus;
    if (needs_segmenter && ctx.seg == nullptr)
      throw DependencyError("cell " + dcfg.label() + "/" + mcfg.label() + "/" + acfg.label() +
                            ": segmenter checkpoint required but not provided");

    std::vector<int> predictions(static_cast<std::size_t>(n));
    std::vector<int> labels(static_cast<std::size_t>(n));

    core::parallel_for(
        n,
        [&](int i) {
          core::Rng rng(core::derive_seed(cell_seed, static_cast<std::uint64_t>(i)));
          const int idx = i % static_cast<int>(test.images.size());
          const Image& source = test.images[static_cast<std::size_t>(idx)];
          const int label = test.labels[static_cast<std::size_t>(idx)];
          labels[static_cast<std::size_t>(i)] = label;

          BinaryMask mask =
              instantiate_mask(mcfg, source.height(), source.width(), rng, ctx.stencil_dir);

          Image attacked = source;
          if (acfg.kind != AttackKind::clean) {
            attack::AttackSpec spec;
            spec.system = models::Mode::closed_set;
            spec.goal = acfg.goal;
            spec.mask = mask;
            spec.alpha = acfg.alpha;
            spec.epsilon = acfg.epsilon;
            spec.steps = acfg.steps;
            spec.source = source;
            spec.label_source = label;
            if (acfg.goal == attack::Goal::impersonation)
              spec.label_target = (label + 1) % test.num_classes;
            if (acfg.kind == AttackKind::bpda && needs_segmenter) {
              spec.adaptive = true;
              spec.sigmoid_temperature = acfg.sigmoid_temperature;
              attacked = attack::pgd_patch_attack(spec, *ctx.fr, &pipeline);
            } else {
              // without a segmenter in the pipeline there is nothing to
              // approximate; the adaptive attack degenerates to plain PGD
              attacked = attack::pgd_patch_attack(spec, *ctx.fr);
            }
          }

          Eigen::VectorXd probs;
          switch (dcfg.kind) {
            case DefenseKind::undefended:
              probs = ctx.fr->predict_probs(attacked);
              break;
            case DefenseKind::gt:
              probs = defense::defend_with_ground_truth(attacked, mask, *ctx.fr, dcfg.fill).probs;
              break;
            case DefenseKind::ours_minus:
            case DefenseKind::ours_plus:
              probs = defense::defend_and_recognize(attacked, pipeline).probs;
              break;
          }
          Eigen::Index arg = 0;
          probs.maxCoeff(&arg);
          predictions[static_cast<std::size_t>(i)] = static_cast<int>(arg);
        },
        ctx.threads);

    CellResult result;
    result.cell_index = cell_index;
    result.defense = dcfg.label();
    result.mask = mcfg.label();
    result.attack = acfg.label();
    result.metric = closed_set_accuracy(predictions, labels);
    result.count = n;
    result.seed = cell_seed;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }
};

void write_cell_record(const std::filesystem::path& path, const CellResult& cell,
                       std::uint64_t fingerprint) {
  nlohmann::json j;
  j["cell_index"] = cell.cell_index;
  j["defense"] = cell.defense;
  j["mask"] = cell.mask;
  j["attack"] = cell.attack;
  j["metric"] = cell.metric;
  j["count"] = cell.count;
  j["seed"] = cell.seed;
  j["wall_seconds"] = cell.wall_seconds;
  j["fingerprint"] = core::fingerprint_hex(fingerprint);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("cannot write cell record: " + tmp);
  }
  std::filesystem::rename(tmp, path);  // atomic publish
}

bool load_cell_record(const std::filesystem::path& path, std::uint64_t fingerprint,
                      CellResult* out) {
  std::ifstream in(path);
  if (!in) return false;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (j.value("fingerprint", "") != core::fingerprint_hex(fingerprint)) return false;
  out->cell_index = j.at("cell_index").get<int>();
  out->defense = j.at("defense").get<std::string>();
  out->mask = j.at("mask").get<std::string>();
  out->attack = j.at("attack").get<std::string>();
  out->metric = j.at("metric").get<double>();
  out->count = j.at("count").get<int>();
  out->seed = j.at("seed").get<std::uint64_t>();
  out->wall_seconds = j.at("wall_seconds").get<double>();
  return true;
}

}  // namespace

EvaluationReport run_grid(const ExperimentGrid& grid, const GridContext& context,
                          const std::filesystem::path& workdir) {
  grid.validate();
  if (context.fr == nullptr) throw DependencyError("run_grid: recognition model missing");
  if (context.testset == nullptr || context.testset->images.empty())
    throw DataError("run_grid: empty test set");
  if (context.fr->mode() != models::Mode::closed_set)
    throw ConfigError("run_grid: grids evaluate closed-set accuracy; use open_set_tar_at_far "
                      "for open-set pipelines");

  const auto cell_dir = workdir / "cells";
  std::filesystem::create_directories(cell_dir);

  EvaluationReport report;
  int cell_index = 0;
  for (const auto& dcfg : grid.defenses) {
    for (const auto& mcfg : grid.masks) {
      for (const auto& acfg : grid.attacks) {
        const std::uint64_t fp = cell_fingerprint(grid, dcfg, mcfg, acfg);
        char name[64];
        std::snprintf(name, sizeof(name), "cell_%04d.json", cell_index);
        const auto record_path = cell_dir / name;

        CellResult cell;
        if (!load_cell_record(record_path, fp, &cell)) {
          CellRunner runner{grid, context};
          cell = runner.run(cell_index, dcfg, mcfg, acfg);
          write_cell_record(record_path, cell, fp);
        }
        report.cells.push_back(std::move(cell));
        ++cell_index;
      }
    }
  }

  report.grid_fingerprint = core::fnv1a64(std::to_string(grid.seed));

  // newline-delimited records plus a summary table
  {
    std::ofstream out(workdir / "report.jsonl");
    for (const auto& c : report.cells) {
      nlohmann::json j{{"defense", c.defense}, {"mask", c.mask},       {"attack", c.attack},
                       {"metric", c.metric},   {"count", c.count},     {"seed", c.seed},
                       {"cell_index", c.cell_index}};
      out << j.dump() << "\n";
    }
  }
  {
    std::ofstream out(workdir / "summary.txt");
    out << "defense              mask         attack       metric   count\n";
    for (const auto& c : report.cells) {
      char line[128];
      std::snprintf(line, sizeof(line), "%-20s %-12s %-12s %7.2f %7d\n", c.defense.c_str(),
                    c.mask.c_str(), c.attack.c_str(), c.metric, c.count);
      out << line;
    }
  }
  return report;
}

namespace {

struct Series {
  std::vector<double> xs;
  std::vector<double> ys;
};

void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                     const std::map<std::string, Series>& series, bool line_chart) {
  const int width = 640, height = 420, margin = 60;
  double xmin = 1e300, xmax = -1e300;
  for (const auto& [name, s] : series)
    for (double x : s.xs) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
  if (!(xmax > xmin)) {
    xmax = xmin + 1.0;
  }
  const double ymin = 0.0, ymax = 100.0;
  auto sx = [&](double x) {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  };
  auto sy = [&](double y) {
    return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  };

  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
  out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
  for (int tick = 0; tick <= 100; tick += 20)
    out << "<text x='" << margin - 8 << "' y='" << sy(tick) + 4
        << "' text-anchor='end' font-size='10'>" << tick << "</text>\n";

  int color_idx = 0;
  int legend_y = margin;
  for (const auto& [name, s] : series) {
    const char* color = kColors[color_idx % 5];
    if (line_chart) {
      out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
      for (std::size_t i = 0; i < s.xs.size(); ++i) out << sx(s.xs[i]) << "," << sy(s.ys[i]) << " ";
      out << "'/>\n";
      for (std::size_t i = 0; i < s.xs.size(); ++i)
        out << "<circle cx='" << sx(s.xs[i]) << "' cy='" << sy(s.ys[i]) << "' r='3' fill='"
            << color << "'/>\n";
    } else {
      const double bar_w = (width - 2.0 * margin) / (s.xs.size() * series.size() + 1);
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        const double x0 = margin + (i * series.size() + static_cast<std::size_t>(color_idx)) * bar_w;
        out << "<rect x='" << x0 << "' y='" << sy(s.ys[i]) << "' width='" << bar_w * 0.9
            << "' height='" << (height - margin - sy(s.ys[i])) << "' fill='" << color << "'/>\n";
      }
    }
    out << "<rect x='" << width - margin - 150 << "' y='" << legend_y << "' width='12' height='12' fill='"
        << color << "'/>\n";
    out << "<text x='" << width - margin - 132 << "' y='" << legend_y + 10 << "' font-size='11'>"
        << name << "</text>\n";
    legend_y += 18;
    ++color_idx;
  }
  out << "</svg>\n";
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const EvaluationReport& report,
                                              const std::filesystem::path& dir) {
  if (report.cells.empty()) throw DataError("emit_plots: empty report");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;

  // SAF sweep: ours+(n=...) cells with at least two distinct n per mask
  std::map<std::string, std::map<std::string, Series>> sweeps;  // mask -> attack -> series
  for (const auto& c : report.cells) {
    if (c.defense.rfind("ours+(n=", 0) != 0) continue;
    const int n = std::stoi(c.defense.substr(8));
    auto& s = sweeps[c.mask][c.attack];
    s.xs.push_back(n);
    s.ys.push_back(c.metric);
  }
  for (auto& [mask, by_attack] : sweeps) {
    std::set<double> distinct;
    for (auto& [attack, s] : by_attack)
      for (double x : s.xs) distinct.insert(x);
    if (distinct.size() < 2) continue;  // no sweep axis
    for (auto& [attack, s] : by_attack) {
      std::vector<std::size_t> idx(s.xs.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.xs[a] < s.xs[b]; });
      Series sorted;
      for (auto i : idx) {
        sorted.xs.push_back(s.xs[i]);
        sorted.ys.push_back(s.ys[i]);
      }
      s = sorted;
    }
    const auto svg = dir / ("saf_sweep_" + mask + ".svg");
    write_svg_chart(svg, "SAF subgrid sweep, mask=" + mask, by_attack, true);
    written.push_back(svg);
    const auto csv = dir / ("saf_sweep_" + mask + ".csv");
    std::ofstream out(csv);
    out << "mask,attack,n,metric\n";
    for (const auto& [attack, s] : by_attack)
      for (std::size_t i = 0; i < s.xs.size(); ++i)
        out << mask << "," << attack << "," << s.xs[i] << "," << s.ys[i] << "\n";
    written.push_back(csv);
  }

  // defense comparison bars per mask
  std::map<std::string, std::map<std::string, Series>> bars;  // mask -> defense -> metric list
  std::map<std::string, std::vector<std::string>> bar_attacks;
  for (const auto& c : report.cells) {
    auto& s = bars[c.mask][c.defense];
    s.xs.push_back(static_cast<double>(s.xs.size()));
    s.ys.push_back(c.metric);
    bar_attacks[c.mask].push_back(c.attack);
  }
  for (const auto& [mask, by_defense] : bars) {
    if (by_defense.size() < 2) continue;
    const auto svg = dir / ("defense_comparison_" + mask + ".svg");
    write_svg_chart(svg, "Defense comparison, mask=" + mask, by_defense, false);
    written.push_back(svg);
    const auto csv = dir / ("defense_comparison_" + mask + ".csv");
    std::ofstream out(csv);
    out << "mask,defense,slot,metric\n";
    for (const auto& [defense, s] : by_defense)
      for (std::size_t i = 0; i < s.xs.size(); ++i)
        out << mask << "," << defense << "," << s.xs[i] << "," << s.ys[i] << "\n";
    written.push_back(csv);
  }
  return written;
}

}  // namespace radap::evalkit
