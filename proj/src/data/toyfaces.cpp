#include "radap/data/toyfaces.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "radap/core/errors.hpp"
#include "radap/core/pnm.hpp"
#include "radap/core/rng.hpp"

namespace radap::data {

namespace {

struct Color {
  double r, g, b;
};

struct IdentityParams {
  Color skin, hair, eye, mouth;
  double face_cx, face_cy, face_rx, face_ry;
  double hair_band;           // fraction of face height covered by hair
  double eye_y, eye_spacing, eye_r;
  double brow_dy, brow_slant, brow_len;
  double mouth_y, mouth_hw, mouth_h, mouth_curve;
  double nose_len, nose_shade;
  int mole_count;
  double mole_x[2], mole_y[2];
};

// Color ranges are kept narrow on purpose: identity has to be read from the
// localized geometry (eyes, brows, mouth, marks, hairline), so occluding a
// face region actually removes identity evidence.
IdentityParams draw_identity(core::Rng& rng) {
  IdentityParams p{};
  const double base = rng.uniform(0.62, 0.78);
  p.skin = {base, base * rng.uniform(0.80, 0.86), base * rng.uniform(0.62, 0.70)};
  const double hv = rng.uniform(0.10, 0.35);
  p.hair = {hv * rng.uniform(0.9, 1.1), hv * rng.uniform(0.7, 0.9), hv * rng.uniform(0.5, 0.7)};
  p.eye = {rng.uniform(0.10, 0.25), rng.uniform(0.10, 0.25), rng.uniform(0.2, 0.4)};
  p.mouth = {rng.uniform(0.55, 0.70), rng.uniform(0.15, 0.25), rng.uniform(0.15, 0.25)};

  p.face_cx = 0.5 + rng.uniform(-0.02, 0.02);
  p.face_cy = 0.53 + rng.uniform(-0.02, 0.02);
  p.face_rx = rng.uniform(0.30, 0.40);
  p.face_ry = rng.uniform(0.38, 0.47);
  p.hair_band = rng.uniform(0.12, 0.45);
  p.eye_y = rng.uniform(0.38, 0.48);
  p.eye_spacing = rng.uniform(0.11, 0.22);
  p.eye_r = rng.uniform(0.028, 0.060);
  p.brow_dy = rng.uniform(0.050, 0.100);
  p.brow_slant = rng.uniform(-0.040, 0.040);
  p.brow_len = rng.uniform(0.045, 0.095);
  p.mouth_y = rng.uniform(0.68, 0.79);
  p.mouth_hw = rng.uniform(0.06, 0.15);
  p.mouth_h = rng.uniform(0.016, 0.046);
  p.mouth_curve = rng.uniform(-0.035, 0.035);
  p.nose_len = rng.uniform(0.07, 0.16);
  p.nose_shade = rng.uniform(0.55, 0.85);
  p.mole_count = rng.uniform_int(0, 2);
  for (int m = 0; m < 2; ++m) {
    p.mole_x[m] = 0.5 + (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * rng.uniform(0.12, 0.26);
    p.mole_y[m] = rng.uniform(0.52, 0.72);
  }
  return p;
}

double soft_in(double dist, double softness) {
  // 1 inside (dist < 1), smooth falloff of the given width outside
  return 1.0 / (1.0 + std::exp((dist - 1.0) / softness));
}

void blend(Image& img, int y, int x, const Color& c, double alpha) {
  if (alpha <= 0.0) return;
  img.at(0, y, x) = img.at(0, y, x) * (1.0 - alpha) + c.r * alpha;
  img.at(1, y, x) = img.at(1, y, x) * (1.0 - alpha) + c.g * alpha;
  img.at(2, y, x) = img.at(2, y, x) * (1.0 - alpha) + c.b * alpha;
}

Image render_face(const IdentityParams& id, int h, int w, core::Rng& rng) {
  const double dx = rng.uniform(-0.035, 0.035);
  const double dy = rng.uniform(-0.035, 0.035);
  const double zoom = rng.uniform(0.95, 1.05);
  const double bg = rng.uniform(0.08, 0.30);
  const double brightness = rng.uniform(0.85, 1.15);
  const double gain_r = rng.uniform(0.96, 1.04);
  const double gain_g = rng.uniform(0.96, 1.04);
  const double gain_b = rng.uniform(0.96, 1.04);

  const double cx = id.face_cx + dx;
  const double cy = id.face_cy + dy;
  const double rx = id.face_rx * zoom;
  const double ry = id.face_ry * zoom;
  const double soft = 0.04;

  Image img(h, w);
  for (int c = 0; c < 3; ++c) img.ch[static_cast<std::size_t>(c)].setConstant(bg);

  for (int y = 0; y < h; ++y) {
    const double v = (y + 0.5) / h;
    for (int x = 0; x < w; ++x) {
      const double u = (x + 0.5) / w;
      const double fu = (u - cx) / rx;
      const double fv = (v - cy) / ry;
      const double face_d = std::sqrt(fu * fu + fv * fv);
      const double face_a = soft_in(face_d, soft);
      blend(img, y, x, id.skin, face_a);

      // hair cap over the top band of the face ellipse
      if (fv < -(1.0 - id.hair_band)) {
        blend(img, y, x, id.hair, face_a * soft_in(face_d, soft));
      }

      // eyes and brows
      for (int side = -1; side <= 1; side += 2) {
        const double ex = cx + side * id.eye_spacing;
        const double ey = cy + (id.eye_y - id.face_cy);
        const double ed = std::hypot(u - ex, v - ey) / id.eye_r;
        blend(img, y, x, Color{0.93, 0.93, 0.93}, soft_in(ed, 0.12));
        blend(img, y, x, id.eye, soft_in(ed * 1.9, 0.10));

        const double by = ey - id.brow_dy + side * id.brow_slant * ((u - ex) / id.brow_len);
        if (std::abs(u - ex) < id.brow_len && std::abs(v - by) < 0.016)
          blend(img, y, x, id.hair, 0.9);
      }

      // nose line
      if (std::abs(u - cx) < 0.012 && v > cy - 0.02 && v < cy - 0.02 + id.nose_len) {
        Color nose{id.skin.r * id.nose_shade, id.skin.g * id.nose_shade, id.skin.b * id.nose_shade};
        blend(img, y, x, nose, 0.8);
      }

      // mouth
      {
        const double my = cy + (id.mouth_y - id.face_cy) + id.mouth_curve * std::pow((u - cx) / id.mouth_hw, 2.0);
        const double md = std::hypot((u - cx) / id.mouth_hw, (v - my) / id.mouth_h);
        blend(img, y, x, id.mouth, soft_in(md, 0.15));
      }

      // beauty marks
      for (int m = 0; m < id.mole_count; ++m) {
        const double mdx = u - (id.mole_x[m] + dx);
        const double mdy = v - (id.mole_y[m] + dy);
        const double md = std::hypot(mdx, mdy) / 0.02;
        blend(img, y, x, Color{0.08, 0.05, 0.04}, soft_in(md, 0.2));
      }
    }
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(0, y, x) = img.at(0, y, x) * brightness * gain_r + rng.normal() * 0.02;
      img.at(1, y, x) = img.at(1, y, x) * brightness * gain_g + rng.normal() * 0.02;
      img.at(2, y, x) = img.at(2, y, x) * brightness * gain_b + rng.normal() * 0.02;
    }
  }
  img.clamp01();
  return img;
}

}  // namespace

void ToyFacesConfig::validate() const {
  if (identities <= 0 || images_per_identity <= 0)
    throw ConfigError("toyfaces: identities and images_per_identity must be positive");
  if (height < 8 || width < 8) throw ConfigError("toyfaces: images must be at least 8x8");
}

Dataset generate_toyfaces(const ToyFacesConfig& config) {
  config.validate();
  Dataset ds;
  ds.num_classes = config.identities;
  ds.images.reserve(static_cast<std::size_t>(config.identities) * config.images_per_identity);
  for (int id = 0; id < config.identities; ++id) {
    const std::uint64_t id_seed =
        core::derive_seed(config.seed, static_cast<std::uint64_t>(config.identity_offset + id));
    core::Rng id_rng(id_seed);
    const IdentityParams params = draw_identity(id_rng);
    for (int i = 0; i < config.images_per_identity; ++i) {
      core::Rng img_rng(core::derive_seed(id_seed, static_cast<std::uint64_t>(i) + 1));
      ds.images.push_back(render_face(params, config.height, config.width, img_rng));
      ds.labels.push_back(id);
    }
  }
  return ds;
}

void save_directory(const Dataset& dataset, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  std::vector<int> counter(static_cast<std::size_t>(dataset.num_classes), 0);
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const int label = dataset.labels[i];
    std::ostringstream cls;
    cls << "class_" << label;
    const auto dir = root / cls.str();
    std::filesystem::create_directories(dir);
    std::ostringstream name;
    name << "img_" << counter[static_cast<std::size_t>(label)]++ << ".ppm";
    core::write_ppm(dir / name.str(), dataset.images[i]);
  }
}

Dataset load_directory(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root))
    throw DataError("dataset directory missing: " + root.string());
  std::map<std::string, std::vector<std::filesystem::path>> classes;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    auto& files = classes[entry.path().filename().string()];
    for (const auto& f : std::filesystem::directory_iterator(entry.path()))
      if (f.path().extension() == ".ppm") files.push_back(f.path());
    std::sort(files.begin(), files.end());
  }
  if (classes.empty()) throw DataError("no class subdirectories in " + root.string());
  Dataset ds;
  ds.num_classes = static_cast<int>(classes.size());
  int label = 0;
  for (const auto& [name, files] : classes) {
    for (const auto& f : files) {
      ds.images.push_back(core::read_ppm(f));
      ds.labels.push_back(label);
    }
    ++label;
  }
  if (ds.images.empty()) throw DataError("dataset is empty: " + root.string());
  return ds;
}

Split split_per_identity(const Dataset& dataset, int num_classes, double train_fraction) {
  Split split;
  split.train.num_classes = num_classes;
  split.test.num_classes = num_classes;
  std::vector<int> seen(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> totals(static_cast<std::size_t>(num_classes), 0);
  for (int label : dataset.labels) ++totals[static_cast<std::size_t>(label)];
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const int label = dataset.labels[i];
    const long cut = std::lround(train_fraction * static_cast<double>(totals[static_cast<std::size_t>(label)]));
    Dataset& target = (seen[static_cast<std::size_t>(label)]++ < cut) ? split.train : split.test;
    target.images.push_back(dataset.images[i]);
    target.labels.push_back(label);
  }
  return split;
}

}  // namespace radap::data
