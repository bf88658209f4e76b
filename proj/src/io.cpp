#include "gridcrf/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gridcrf {

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Write-then-rename so partially written files never replace good ones.
void atomic_write(const std::string& path, const std::string& payload) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": cannot open for writing");
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError(path + ": write failed");
  }
  fs::rename(tmp, target);
}

// Whitespace-token cursor over a text payload.
class TokenReader {
 public:
  TokenReader(std::string text, std::string origin)
      : text_(std::move(text)), origin_(std::move(origin)) {}

  bool done() {
    skip_space();
    return pos_ >= text_.size();
  }

  std::string next() {
    skip_space();
    if (pos_ >= text_.size()) throw IoError(origin_ + ": unexpected end of file");
    size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    return text_.substr(start, pos_ - start);
  }

  std::string expect(const std::string& keyword) {
    const std::string token = next();
    if (token != keyword)
      throw IoError(origin_ + ": expected '" + keyword + "', got '" + token + "'");
    return token;
  }

  double number() {
    const std::string token = next();
    try {
      size_t used = 0;
      const double value = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      return value;
    } catch (const std::exception&) {
      throw IoError(origin_ + ": expected a number, got '" + token + "'");
    }
  }

  int integer() {
    const double value = number();
    const int rounded = static_cast<int>(std::llround(value));
    if (value != rounded) throw IoError(origin_ + ": expected an integer");
    return rounded;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  std::string text_;
  std::string origin_;
  size_t pos_ = 0;
};

}  // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

Image read_image_ppm(const std::string& path) {
  const std::string data = read_file(path);
  size_t pos = 0;

  auto fail = [&](const std::string& reason) -> IoError {
    return IoError(path + ": " + reason + " at byte " + std::to_string(pos));
  };
  auto skip_header_space = [&]() {
    while (pos < data.size()) {
      const char c = data[pos];
      if (c == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto header_int = [&]() -> int {
    skip_header_space();
    if (pos >= data.size() || !std::isdigit(static_cast<unsigned char>(data[pos])))
      throw fail("expected a decimal header field");
    long value = 0;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) {
      value = value * 10 + (data[pos] - '0');
      if (value > 1 << 20) throw fail("header field too large");
      ++pos;
    }
    return static_cast<int>(value);
  };

  if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6'))
    throw fail("bad magic, expected P5 or P6");
  const bool color = data[1] == '6';
  pos = 2;

  const int width = header_int();
  const int height = header_int();
  const int maxval = header_int();
  if (width < 1 || height < 1) throw fail("non-positive dimensions");
  if (maxval <= 0 || maxval > 255) throw fail("maxval must be in 1..255");
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
    throw fail("expected single whitespace before payload");
  ++pos;

  const size_t pixel_count = static_cast<size_t>(width) * height;
  const size_t expected = pixel_count * (color ? 3 : 1);
  if (data.size() - pos < expected)
    throw IoError(path + ": truncated payload, expected " + std::to_string(expected) +
                  " bytes, got " + std::to_string(data.size() - pos));

  Image image;
  image.height = height;
  image.width = width;
  image.rgb.resize(pixel_count * 3);
  for (size_t i = 0; i < pixel_count; ++i) {
    if (color) {
      image.rgb[3 * i + 0] = static_cast<unsigned char>(data[pos + 3 * i + 0]);
      image.rgb[3 * i + 1] = static_cast<unsigned char>(data[pos + 3 * i + 1]);
      image.rgb[3 * i + 2] = static_cast<unsigned char>(data[pos + 3 * i + 2]);
    } else {
      const unsigned char g = static_cast<unsigned char>(data[pos + i]);
      image.rgb[3 * i + 0] = image.rgb[3 * i + 1] = image.rgb[3 * i + 2] = g;
    }
  }
  return image;
}

void write_pgm(const std::string& path, int height, int width,
               const std::vector<unsigned char>& gray) {
  if (static_cast<int>(gray.size()) != height * width)
    throw IoError(path + ": pixel buffer does not match dimensions");
  std::string payload = "P5\n" + std::to_string(width) + " " +
                        std::to_string(height) + "\n255\n";
  payload.append(reinterpret_cast<const char*>(gray.data()), gray.size());
  atomic_write(path, payload);
}

FeatureField image_features(const Image& image, double theta_p, double theta_c) {
  GridGeometry geometry{image.height, image.width, 0};
  return make_features(geometry, image.rgb, theta_p, theta_c);
}

InstanceFile read_instance(const std::string& path) {
  TokenReader reader(read_file(path), path);
  reader.expect("GRIDCRF-INSTANCE");
  if (reader.integer() != 1) throw IoError(path + ": unsupported version");

  reader.expect("HEADER");
  int height = -1, width = -1, labels = -1, spatial_radius = -1;
  int bilateral_radius = -1;
  double epsilon = 1e-8, unary_weight = 0.5;
  double theta_p = 8.0, theta_c = 16.0;
  bool has_bilateral = false;
  while (true) {
    const std::string key = reader.next();
    if (key == "END_HEADER") break;
    if (key == "height") height = reader.integer();
    else if (key == "width") width = reader.integer();
    else if (key == "labels") labels = reader.integer();
    else if (key == "spatial_radius") spatial_radius = reader.integer();
    else if (key == "epsilon") epsilon = reader.number();
    else if (key == "unary_weight") unary_weight = reader.number();
    else if (key == "bilateral_radius") {
      bilateral_radius = reader.integer();
      has_bilateral = true;
    } else if (key == "theta_p") theta_p = reader.number();
    else if (key == "theta_c") theta_c = reader.number();
    else throw IoError(path + ": unknown header key '" + key + "'");
  }
  if (height < 1 || width < 1 || labels < 2 || spatial_radius < 0)
    throw IoError(path + ": incomplete or invalid header");

  const int n = height * width;
  InstanceFile file;
  CrfInstance& inst = file.instance;
  inst.geometry = {height, width, spatial_radius};
  inst.labels = labels;

  reader.expect("UNARY");
  Matrix scores(n, labels);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < labels; ++l) scores(i, l) = reader.number();
  inst.unary = make_unary(scores, unary_weight, epsilon);

  reader.expect("SPATIAL");
  inst.spatial = SpatialKernelBank::zeros(labels, spatial_radius);
  for (double& tap : inst.spatial.taps) tap = reader.number();

  std::string section = reader.next();
  if (has_bilateral) {
    if (section != "BILATERAL")
      throw IoError(path + ": header declares a bilateral bank but section is '" +
                    section + "'");
    inst.bilateral = BilateralKernelBank::zeros(labels, bilateral_radius);
    for (double& tap : inst.bilateral->taps) tap = reader.number();

    reader.expect("FEATURES");
    const std::string kind = reader.next();
    FeatureField features;
    features.theta_p = theta_p;
    features.theta_c = theta_c;
    if (kind == "FROM_IMAGE") {
      const std::string name = reader.next();
      fs::path image_path(name);
      if (image_path.is_relative())
        image_path = fs::path(path).parent_path() / image_path;
      const Image image = read_image_ppm(image_path.string());
      if (image.height != height || image.width != width)
        throw IoError(path + ": image dimensions do not match the grid");
      features = image_features(image, theta_p, theta_c);
    } else if (kind == "INLINE") {
      features.values.resize(n, 5);
      for (int i = 0; i < n; ++i)
        for (int d = 0; d < 5; ++d) features.values(i, d) = reader.number();
    } else {
      throw IoError(path + ": features must be FROM_IMAGE or INLINE");
    }
    inst.features = std::move(features);
    section = reader.next();
  }

  if (section == "TRUTH") {
    DiscreteLabeling truth(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = reader.integer();
      if (truth[i] < 0 || truth[i] >= labels)
        throw IoError(path + ": truth label out of range at pixel " +
                      std::to_string(i));
    }
    file.truth = std::move(truth);
    section = reader.next();
  }
  if (section != "END") throw IoError(path + ": expected END, got '" + section + "'");

  inst.validate();
  return file;
}

void write_instance(const std::string& path, const CrfInstance& inst,
                    const DiscreteLabeling* truth) {
  inst.validate();
  std::ostringstream out;
  out << "GRIDCRF-INSTANCE 1\n";
  out << "HEADER\n";
  out << "height " << inst.geometry.height << "\n";
  out << "width " << inst.geometry.width << "\n";
  out << "labels " << inst.labels << "\n";
  out << "spatial_radius " << inst.geometry.spatial_radius << "\n";
  out << "epsilon " << format_double(inst.unary.floor) << "\n";
  out << "unary_weight " << format_double(inst.unary.weight) << "\n";
  if (inst.bilateral) {
    out << "bilateral_radius " << inst.bilateral->radius << "\n";
    out << "theta_p " << format_double(inst.features->theta_p) << "\n";
    out << "theta_c " << format_double(inst.features->theta_c) << "\n";
  }
  out << "END_HEADER\n";

  out << "UNARY\n";
  for (Eigen::Index i = 0; i < inst.unary.scores.rows(); ++i) {
    for (Eigen::Index l = 0; l < inst.unary.scores.cols(); ++l)
      out << (l ? " " : "") << format_double(inst.unary.scores(i, l));
    out << "\n";
  }

  out << "SPATIAL\n";
  {
    const auto& bank = inst.spatial;
    for (int lam = 0; lam < bank.labels; ++lam)
      for (int mu = 0; mu < bank.labels; ++mu) {
        for (int dy = -bank.radius; dy <= bank.radius; ++dy) {
          for (int dx = -bank.radius; dx <= bank.radius; ++dx)
            out << (dx > -bank.radius ? " " : "")
                << format_double(bank.tap(lam, mu, dx, dy));
          out << "\n";
        }
      }
  }

  if (inst.bilateral) {
    out << "BILATERAL\n";
    const auto& bank = *inst.bilateral;
    const auto offsets = BilateralKernelBank::offsets(bank.radius);
    for (int lam = 0; lam < bank.labels; ++lam)
      for (int mu = 0; mu < bank.labels; ++mu) {
        bool first = true;
        for (const auto& d : offsets) {
          out << (first ? "" : " ") << format_double(bank.tap(lam, mu, d));
          first = false;
        }
        out << "\n";
      }
    out << "FEATURES\nINLINE\n";
    for (Eigen::Index i = 0; i < inst.features->values.rows(); ++i) {
      for (int d = 0; d < 5; ++d)
        out << (d ? " " : "") << format_double(inst.features->values(i, d));
      out << "\n";
    }
  }

  if (truth) {
    out << "TRUTH\n";
    for (size_t i = 0; i < truth->size(); ++i)
      out << (*truth)[i] << ((i + 1) % 16 == 0 ? "\n" : " ");
    out << "\n";
  }
  out << "END\n";
  atomic_write(path, out.str());
}

ParameterSet read_parameters(const std::string& path) {
  TokenReader reader(read_file(path), path);
  reader.expect("GRIDCRF-PARAMS");
  if (reader.integer() != 1) throw IoError(path + ": unsupported version");

  const int labels = [&] {
    reader.expect("labels");
    return reader.integer();
  }();
  reader.expect("spatial_radius");
  const int spatial_radius = reader.integer();
  reader.expect("unary_weight");
  const double unary_weight = reader.number();

  ParameterSet params;
  params.unary_weight = unary_weight;
  reader.expect("SPATIAL");
  params.spatial = SpatialKernelBank::zeros(labels, spatial_radius);
  for (double& tap : params.spatial.taps) tap = reader.number();

  std::string section = reader.next();
  if (section == "BILATERAL") {
    const int radius = reader.integer();
    params.bilateral = BilateralKernelBank::zeros(labels, radius);
    for (double& tap : params.bilateral->taps) tap = reader.number();
    section = reader.next();
  }
  if (section != "END") throw IoError(path + ": expected END, got '" + section + "'");
  return params;
}

void write_parameters(const std::string& path, const ParameterSet& params) {
  std::ostringstream out;
  out << "GRIDCRF-PARAMS 1\n";
  out << "labels " << params.spatial.labels << "\n";
  out << "spatial_radius " << params.spatial.radius << "\n";
  out << "unary_weight " << format_double(params.unary_weight) << "\n";
  out << "SPATIAL\n";
  for (size_t i = 0; i < params.spatial.taps.size(); ++i)
    out << format_double(params.spatial.taps[i])
        << ((i + 1) % static_cast<size_t>(params.spatial.side()) == 0 ? "\n" : " ");
  if (params.bilateral) {
    out << "BILATERAL " << params.bilateral->radius << "\n";
    for (size_t i = 0; i < params.bilateral->taps.size(); ++i)
      out << format_double(params.bilateral->taps[i])
          << ((i + 1) % 9 == 0 ? "\n" : " ");
    out << "\n";
  }
  out << "END\n";
  atomic_write(path, out.str());
}

void write_trace_csv(const std::string& path, const InferenceTrace& trace) {
  std::ostringstream out;
  out << "step,relaxed_energy,kl_objective,method\n";
  for (size_t t = 0; t < trace.energies.size(); ++t) {
    out << t << "," << format_double(trace.energies[t]) << ",";
    if (t < trace.kl.size()) out << format_double(trace.kl[t]);
    out << "," << trace.method << "\n";
  }
  atomic_write(path, out.str());
}

void write_filter_heatmaps(const SpatialKernelBank& bank, const std::string& dir) {
  fs::create_directories(dir);
  const int side = bank.side();
  for (int lam = 0; lam < bank.labels; ++lam)
    for (int mu = 0; mu < bank.labels; ++mu) {
      double lo = bank.tap(lam, mu, -bank.radius, -bank.radius);
      double hi = lo;
      for (int dy = -bank.radius; dy <= bank.radius; ++dy)
        for (int dx = -bank.radius; dx <= bank.radius; ++dx) {
          const double v = bank.tap(lam, mu, dx, dy);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }

      std::vector<unsigned char> gray(static_cast<size_t>(side) * side, 128);
      if (hi > lo) {
        for (int dy = -bank.radius; dy <= bank.radius; ++dy)
          for (int dx = -bank.radius; dx <= bank.radius; ++dx) {
            const double v = bank.tap(lam, mu, dx, dy);
            const double t = (v - lo) / (hi - lo);
            gray[(dy + bank.radius) * side + (dx + bank.radius)] =
                static_cast<unsigned char>(std::lround(t * 255.0));
          }
      }
      const std::string stem =
          dir + "/filter_" + std::to_string(lam) + "_" + std::to_string(mu);
      write_pgm(stem + ".pgm", side, side, gray);
      atomic_write(stem + ".txt", "min " + format_double(lo) + "\nmax " +
                                      format_double(hi) + "\n");
    }
}

void write_label_map(const std::string& path, const GridGeometry& geometry,
                     const DiscreteLabeling& labels) {
  if (static_cast<int>(labels.size()) != geometry.pixels())
    throw IoError(path + ": label map does not match grid");
  std::vector<unsigned char> gray(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 255)
      throw IoError(path + ": label out of PGM range");
    gray[i] = static_cast<unsigned char>(labels[i]);
  }
  write_pgm(path, geometry.height, geometry.width, gray);
}

}  // namespace gridcrf
