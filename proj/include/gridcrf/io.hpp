#pragma once

#include "gridcrf/inference.hpp"
#include "gridcrf/instance.hpp"
#include "gridcrf/learning.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridcrf {

// A parse or serialization failure; `what()` carries the file, offset or
// line, and what was expected.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Decoded binary PGM (P5) or PPM (P6), maxval <= 255. Gray images are
// replicated across the three channels.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<unsigned char> rgb;  // 3 bytes per pixel, raster order
};

Image read_image_ppm(const std::string& path);
void write_pgm(const std::string& path, int height, int width,
               const std::vector<unsigned char>& gray);

// Feature field from an image with the given kernel scales.
FeatureField image_features(const Image& image, double theta_p, double theta_c);

// Plain-text instance container. Sections: HEADER, UNARY, SPATIAL,
// BILATERAL (optional), FEATURES (optional, inline or FROM_IMAGE), TRUTH
// (optional). Values round-trip exactly (17 significant digits).
struct InstanceFile {
  CrfInstance instance;
  std::optional<DiscreteLabeling> truth;
};

InstanceFile read_instance(const std::string& path);
void write_instance(const std::string& path, const CrfInstance& inst,
                    const DiscreteLabeling* truth = nullptr);

ParameterSet read_parameters(const std::string& path);
void write_parameters(const std::string& path, const ParameterSet& params);

// CSV rows "step,relaxed_energy,kl_objective,method"; the kl column is
// empty when the objective is undefined for that trace.
void write_trace_csv(const std::string& path, const InferenceTrace& trace);

// One PGM heatmap per label pair, taps affinely mapped to [0,255], with
// the min/max of each filter recorded in a sidecar text file.
void write_filter_heatmaps(const SpatialKernelBank& bank, const std::string& dir);

// Renders a label map as a raw-label PGM (pixel value = label index).
void write_label_map(const std::string& path, const GridGeometry& geometry,
                     const DiscreteLabeling& labels);

// Decimal formatting used by every writer: shortest representation that
// round-trips a double exactly.
std::string format_double(double value);

}  // namespace gridcrf
