#include "radap/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace radap::cli {

namespace {

using nlohmann::json;

void check_known_keys(const json& section, const std::string& name,
                      const std::set<std::string>& allowed) {
  for (const auto& [key, value] : section.items())
    if (!allowed.count(key))
      throw ValidationError("config: unknown key \"" + key + "\" in section \"" + name + "\"");
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(std::string("config: key \"") + key + "\" has the wrong type");
    }
  }
}

void get_area(const json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2)
    throw ValidationError(std::string("config: \"") + key + "\" must be [a, b]");
  lo = a[0].get<double>();
  hi = a[1].get<double>();
}

void parse_dataset(const json& j, DatasetConfig& c) {
  check_known_keys(j, "dataset",
                   {"kind", "path", "height", "width", "identities", "images_per_identity",
                    "train_fraction"});
  get_if_present(j, "kind", c.kind);
  get_if_present(j, "path", c.path);
  get_if_present(j, "height", c.height);
  get_if_present(j, "width", c.width);
  get_if_present(j, "identities", c.identities);
  get_if_present(j, "images_per_identity", c.images_per_identity);
  get_if_present(j, "train_fraction", c.train_fraction);
  if (c.kind != "procedural" && c.kind != "directory")
    throw ValidationError("config: dataset.kind must be procedural or directory");
  if (c.kind == "directory" && c.path.empty())
    throw ValidationError("config: dataset.path required for directory datasets");
  if (c.height < 8 || c.width < 8)
    throw ValidationError("config: dataset dimensions must be at least 8");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    throw ValidationError("config: dataset.train_fraction must lie in (0, 1)");
}

void parse_mask(const json& j, MaskStageConfig& c) {
  check_known_keys(j, "mask", {"kind", "height", "width", "delta", "area", "rects", "count"});
  get_if_present(j, "kind", c.kind);
  get_if_present(j, "height", c.height);
  get_if_present(j, "width", c.width);
  get_if_present(j, "delta", c.delta);
  get_area(j, "area", c.area_min, c.area_max);
  get_if_present(j, "rects", c.rects);
  get_if_present(j, "count", c.count);
  static const std::set<std::string> kinds{"fmask", "rmask", "glasses", "sticker", "respirator"};
  if (!kinds.count(c.kind)) throw ValidationError("config: mask.kind unknown: " + c.kind);
  if (!(c.delta > 0.0)) throw ValidationError("config: mask.delta must be > 0");
  if (!(c.area_min >= 0.0 && c.area_min < c.area_max && c.area_max <= 1.0))
    throw ValidationError("config: mask.area must satisfy 0 <= a < b <= 1 (area_range)");
  if (c.count < 1) throw ValidationError("config: mask.count must be >= 1");
}

void parse_train_fr(const json& j, TrainFrConfig& c) {
  check_known_keys(j, "train_fr",
                   {"mode", "augment", "epochs", "batch_size", "lr", "momentum", "weight_decay",
                    "nesterov", "fcutout_area", "fcutout_delta", "apply_probability", "fill",
                    "widths"});
  get_if_present(j, "mode", c.mode);
  get_if_present(j, "augment", c.augment);
  get_if_present(j, "epochs", c.epochs);
  get_if_present(j, "batch_size", c.batch_size);
  get_if_present(j, "lr", c.lr);
  get_if_present(j, "momentum", c.momentum);
  get_if_present(j, "weight_decay", c.weight_decay);
  get_if_present(j, "nesterov", c.nesterov);
  get_area(j, "fcutout_area", c.fcutout_area_min, c.fcutout_area_max);
  get_if_present(j, "fcutout_delta", c.fcutout_delta);
  get_if_present(j, "apply_probability", c.apply_probability);
  get_if_present(j, "fill", c.fill);
  get_if_present(j, "widths", c.widths);
  if (c.mode != "closed_set" && c.mode != "open_set")
    throw ValidationError("config: train_fr.mode must be closed_set or open_set");
  if (c.augment != "none" && c.augment != "cutout" && c.augment != "fcutout")
    throw ValidationError("config: train_fr.augment must be none, cutout or fcutout");
  if (c.epochs < 1) throw ValidationError("config: train_fr.epochs must be >= 1");
  if (!(c.lr > 0.0)) throw ValidationError("config: train_fr.lr must be > 0");
  if (!(c.apply_probability >= 0.0 && c.apply_probability <= 1.0))
    throw ValidationError("config: train_fr.apply_probability must lie in [0, 1]");
  if (!(c.fcutout_area_min >= 0.0 && c.fcutout_area_min < c.fcutout_area_max &&
        c.fcutout_area_max <= 1.0))
    throw ValidationError("config: train_fr.fcutout_area must satisfy 0 <= a < b <= 1 (area_range)");
}

void parse_gen_fpatch(const json& j, GenFpatchConfig& c) {
  check_known_keys(j, "gen_fpatch",
                   {"count", "area", "delta", "alpha", "epsilon", "t_max"});
  get_if_present(j, "count", c.count);
  get_area(j, "area", c.area_min, c.area_max);
  get_if_present(j, "delta", c.delta);
  get_if_present(j, "alpha", c.alpha);
  get_if_present(j, "epsilon", c.epsilon);
  get_if_present(j, "t_max", c.t_max);
  if (c.count < 1) throw ValidationError("config: gen_fpatch.count must be >= 1");
  if (!(c.area_min >= 0.0 && c.area_min < c.area_max && c.area_max <= 1.0))
    throw ValidationError("config: gen_fpatch.area must satisfy 0 <= a < b <= 1 (area_range)");
  if (!(c.alpha > 0.0 && c.epsilon > 0.0 && c.alpha <= c.epsilon))
    throw ValidationError("config: gen_fpatch requires 0 < alpha <= epsilon");
  if (c.t_max < 1) throw ValidationError("config: gen_fpatch.t_max must be >= 1");
}

void parse_train_segmenter(const json& j, TrainSegConfig& c) {
  check_known_keys(j, "train_segmenter", {"epochs", "batch_size", "lr", "beta", "widths"});
  get_if_present(j, "epochs", c.epochs);
  get_if_present(j, "batch_size", c.batch_size);
  get_if_present(j, "lr", c.lr);
  get_if_present(j, "beta", c.beta);
  get_if_present(j, "widths", c.widths);
  if (c.epochs < 1) throw ValidationError("config: train_segmenter.epochs must be >= 1");
  if (!(c.beta >= 0.0))
    throw ValidationError("config: train_segmenter.beta must be >= 0 (EBCE edge weight)");
}

void parse_attack(const json& j, AttackStageConfig& c) {
  check_known_keys(j, "attack",
                   {"system", "goal", "mask", "alpha", "epsilon", "steps", "adaptive",
                    "sigmoid_temperature", "paper_literal_sign"});
  get_if_present(j, "system", c.system);
  get_if_present(j, "goal", c.goal);
  get_if_present(j, "mask", c.mask);
  get_if_present(j, "alpha", c.alpha);
  get_if_present(j, "epsilon", c.epsilon);
  get_if_present(j, "steps", c.steps);
  get_if_present(j, "adaptive", c.adaptive);
  get_if_present(j, "sigmoid_temperature", c.sigmoid_temperature);
  get_if_present(j, "paper_literal_sign", c.paper_literal_sign);
  if (c.system != "closed_set" && c.system != "open_set")
    throw ValidationError("config: attack.system must be closed_set or open_set");
  if (c.goal != "evasion" && c.goal != "impersonation")
    throw ValidationError("config: attack.goal must be evasion or impersonation");
  if (!(c.alpha > 0.0 && c.epsilon > 0.0 && c.alpha <= c.epsilon))
    throw ValidationError("config: attack requires 0 < alpha <= epsilon");
  if (c.steps < 0) throw ValidationError("config: attack.steps must be >= 0");
  if (!(c.sigmoid_temperature > 0.0))
    throw ValidationError("config: attack.sigmoid_temperature must be > 0");
}

void parse_defend(const json& j, DefendConfig& c) {
  check_known_keys(j, "defend", {"saf_n", "use_saf", "fill"});
  get_if_present(j, "saf_n", c.saf_n);
  get_if_present(j, "use_saf", c.use_saf);
  get_if_present(j, "fill", c.fill);
  if (c.saf_n < 1) throw ValidationError("config: defend.saf_n must be >= 1");
  if (!(c.fill >= 0.0 && c.fill <= 1.0))
    throw ValidationError("config: defend.fill must lie in [0, 1]");
}

void parse_evaluate(const json& j, EvaluateConfig& c) {
  check_known_keys(j, "evaluate",
                   {"defenses", "masks", "attacks", "images_per_cell", "saf_sweep", "steps",
                    "alpha", "epsilon", "sigmoid_temperature", "saf_n", "fmask_area",
                    "fmask_delta"});
  get_if_present(j, "defenses", c.defenses);
  get_if_present(j, "masks", c.masks);
  get_if_present(j, "attacks", c.attacks);
  get_if_present(j, "images_per_cell", c.images_per_cell);
  get_if_present(j, "saf_sweep", c.saf_sweep);
  get_if_present(j, "steps", c.steps);
  get_if_present(j, "alpha", c.alpha);
  get_if_present(j, "epsilon", c.epsilon);
  get_if_present(j, "sigmoid_temperature", c.sigmoid_temperature);
  get_if_present(j, "saf_n", c.saf_n);
  get_area(j, "fmask_area", c.fmask_area_min, c.fmask_area_max);
  get_if_present(j, "fmask_delta", c.fmask_delta);
  if (!(c.fmask_area_min >= 0.0 && c.fmask_area_min < c.fmask_area_max && c.fmask_area_max <= 1.0))
    throw ValidationError("config: evaluate.fmask_area must satisfy 0 <= a < b <= 1 (area_range)");
  static const std::set<std::string> defenses{"undefended", "gt", "ours-", "ours+"};
  static const std::set<std::string> masks{"glasses", "sticker", "respirator", "rmask", "fmask"};
  static const std::set<std::string> attacks{"clean", "pgd", "pgd-impersonation", "bpda"};
  for (const auto& d : c.defenses)
    if (!defenses.count(d)) throw ValidationError("config: evaluate.defenses has unknown \"" + d + "\"");
  for (const auto& m : c.masks)
    if (!masks.count(m)) throw ValidationError("config: evaluate.masks has unknown \"" + m + "\"");
  for (const auto& a : c.attacks)
    if (!attacks.count(a)) throw ValidationError("config: evaluate.attacks has unknown \"" + a + "\"");
  if (c.defenses.empty() || c.masks.empty() || c.attacks.empty())
    throw ValidationError("config: evaluate axes must be nonempty");
  if (c.images_per_cell < 1)
    throw ValidationError("config: evaluate.images_per_cell must be >= 1");
  for (int n : c.saf_sweep)
    if (n < 1) throw ValidationError("config: evaluate.saf_sweep entries must be >= 1");
}

}  // namespace

RunConfig parse_config_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  check_known_keys(j, "<top>",
                   {"seed", "artifact_dir", "dataset", "mask", "train_fr", "gen_fpatch",
                    "train_segmenter", "attack", "defend", "evaluate"});
  RunConfig c;
  c.snapshot = j;
  if (!j.contains("seed")) throw ValidationError("config: top-level \"seed\" is required");
  get_if_present(j, "seed", c.seed);
  get_if_present(j, "artifact_dir", c.artifact_dir);
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), c.dataset);
  if (j.contains("mask")) parse_mask(j.at("mask"), c.mask);
  if (j.contains("train_fr")) parse_train_fr(j.at("train_fr"), c.train_fr);
  if (j.contains("gen_fpatch")) parse_gen_fpatch(j.at("gen_fpatch"), c.gen_fpatch);
  if (j.contains("train_segmenter")) parse_train_segmenter(j.at("train_segmenter"), c.train_segmenter);
  if (j.contains("attack")) parse_attack(j.at("attack"), c.attack);
  if (j.contains("defend")) parse_defend(j.at("defend"), c.defend);
  if (j.contains("evaluate")) parse_evaluate(j.at("evaluate"), c.evaluate);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config file not readable: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);  // allow comments
  } catch (const nlohmann::json::parse_error& e) {
    std::ostringstream os;
    os << "config parse error in " << path.string() << " at byte " << e.byte << ": " << e.what();
    throw ValidationError(os.str());
  }
  return parse_config_json(j);
}

std::vector<std::string> validate_config(const std::filesystem::path& path) {
  std::vector<std::string> problems;
  try {
    parse_config(path);
  } catch (const Error& e) {
    problems.emplace_back(e.what());
  }
  return problems;
}

nlohmann::json default_config_json() {
  return nlohmann::json{
      {"seed", 7},
      {"artifact_dir", "artifacts"},
      {"dataset",
       {{"kind", "procedural"},
        {"height", 32},
        {"width", 32},
        {"identities", 16},
        {"images_per_identity", 100},
        {"train_fraction", 0.8}}},
      {"mask",
       {{"kind", "fmask"},
        {"height", 32},
        {"width", 32},
        {"delta", 3.0},
        {"area", {0.02, 0.3}},
        {"rects", 1},
        {"count", 1}}},
      {"train_fr",
       {{"mode", "closed_set"},
        {"augment", "fcutout"},
        {"epochs", 60},
        {"batch_size", 16},
        {"lr", 0.03},
        {"momentum", 0.9},
        {"weight_decay", 1e-4},
        {"nesterov", true},
        {"fcutout_area", {0.0, 1.0}},
        {"apply_probability", 1.0},
        {"fill", 0.0}}},
      {"gen_fpatch",
       {{"count", 500},
        {"area", {0.02, 0.3}},
        {"delta", 3.0},
        {"alpha", 0.007},
        {"epsilon", 0.3},
        {"t_max", 200}}},
      {"train_segmenter",
       {{"epochs", 30}, {"batch_size", 16}, {"lr", 0.01}, {"beta", 1.0}}},
      {"attack",
       {{"system", "closed_set"},
        {"goal", "evasion"},
        {"mask", "sticker"},
        {"alpha", 0.007},
        {"epsilon", 0.3},
        {"steps", 100},
        {"adaptive", false},
        {"sigmoid_temperature", 10.0}}},
      {"defend", {{"saf_n", 8}, {"use_saf", true}, {"fill", 0.0}}},
      {"evaluate",
       {{"defenses", {"undefended", "gt", "ours-", "ours+"}},
        {"masks", {"glasses", "sticker", "respirator", "rmask", "fmask"}},
        {"attacks", {"clean", "pgd"}},
        {"images_per_cell", 200},
        {"saf_sweep", nlohmann::json::array()},
        {"steps", 100}}}};
}

}  // namespace radap::cli
