#include <doctest.h>

#include "gridcrf/io.hpp"
#include "gridcrf/synth.hpp"
#include "helpers.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace gridcrf;
using namespace gridcrf::testing;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("gridcrf_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_raw(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("ppm/pgm parsing") {
  TempDir dir;

  SUBCASE("1x1 white P5 pixel") {
    write_raw(dir.file("white.pgm"), std::string("P5\n1 1\n255\n") + '\xff');
    const Image image = read_image_ppm(dir.file("white.pgm"));
    CHECK(image.height == 1);
    CHECK(image.width == 1);
    CHECK(image.rgb == std::vector<unsigned char>{255, 255, 255});
    const FeatureField f = image_features(image, 4.0, 32.0);
    CHECK(f.values(0, 0) == 0.0);
    CHECK(f.values(0, 1) == 0.0);
    CHECK(f.values(0, 2) == doctest::Approx(255.0 / 32.0));
  }

  SUBCASE("comments in the header are ignored") {
    const std::string payload(12, '\x40');
    write_raw(dir.file("plain.ppm"), "P6\n2 2\n255\n" + payload);
    write_raw(dir.file("commented.ppm"),
              "P6\n# camera zero\n2 # width\n2\n# maxval next\n255\n" + payload);
    const Image a = read_image_ppm(dir.file("plain.ppm"));
    const Image b = read_image_ppm(dir.file("commented.ppm"));
    CHECK(a.rgb == b.rgb);
    CHECK(a.width == b.width);
  }

  SUBCASE("truncated payloads name the missing bytes") {
    write_raw(dir.file("short.pgm"), "P5\n2 2\n255\nab");
    CHECK_THROWS_WITH_AS(read_image_ppm(dir.file("short.pgm")),
                         doctest::Contains("expected 4 bytes, got 2"), IoError);
  }

  SUBCASE("bad magic is rejected with an offset") {
    write_raw(dir.file("bad.pgm"), "P7\n1 1\n255\nx");
    CHECK_THROWS_WITH_AS(read_image_ppm(dir.file("bad.pgm")),
                         doctest::Contains("magic"), IoError);
  }

  SUBCASE("pgm write/read round-trip") {
    const std::vector<unsigned char> gray{0, 64, 128, 255, 1, 2};
    write_pgm(dir.file("map.pgm"), 2, 3, gray);
    const Image image = read_image_ppm(dir.file("map.pgm"));
    CHECK(image.height == 2);
    CHECK(image.width == 3);
    for (int i = 0; i < 6; ++i) CHECK(image.rgb[3 * i] == gray[i]);
  }
}

TEST_CASE("instance files round-trip exactly") {
  TempDir dir;

  SUBCASE("full instance with bilateral bank and truth") {
    const CrfInstance inst = random_instance(13, 3, 4, 3, 1, true);
    DiscreteLabeling truth(12);
    for (size_t i = 0; i < truth.size(); ++i) truth[i] = static_cast<int>(i % 3);
    write_instance(dir.file("full.gci"), inst, &truth);
    const InstanceFile loaded = read_instance(dir.file("full.gci"));

    CHECK(loaded.instance.geometry.height == 3);
    CHECK(loaded.instance.geometry.width == 4);
    CHECK((loaded.instance.unary.scores - inst.unary.scores).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.instance.unary.psi - inst.unary.psi).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.instance.spatial.taps == inst.spatial.taps);
    REQUIRE(loaded.instance.bilateral.has_value());
    CHECK(loaded.instance.bilateral->taps == inst.bilateral->taps);
    CHECK((loaded.instance.features->values - inst.features->values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    REQUIRE(loaded.truth.has_value());
    CHECK(*loaded.truth == truth);

    // Writing the loaded copy reproduces the file byte for byte.
    write_instance(dir.file("again.gci"), loaded.instance, &*loaded.truth);
    CHECK(slurp(dir.file("full.gci")) == slurp(dir.file("again.gci")));
  }

  SUBCASE("spatial-only instance without truth") {
    const CrfInstance inst = potts_1x2();
    write_instance(dir.file("pair.gci"), inst);
    const InstanceFile loaded = read_instance(dir.file("pair.gci"));
    CHECK_FALSE(loaded.truth.has_value());
    CHECK_FALSE(loaded.instance.bilateral.has_value());
    CHECK(loaded.instance.spatial.taps == inst.spatial.taps);
    CHECK(energy_discrete(loaded.instance, {1, 0}) == doctest::Approx(3.0));
  }

  SUBCASE("features can come from an image") {
    write_raw(dir.file("tex.pgm"), std::string("P5\n2 2\n255\n") + "\x10\x20\x30\x40");
    CrfInstance inst = random_instance(14, 2, 2, 2, 1, true);
    write_instance(dir.file("img.gci"), inst);
    // Point the FEATURES section at the image by hand.
    std::string text = slurp(dir.file("img.gci"));
    const size_t pos = text.find("FEATURES\nINLINE\n");
    REQUIRE(pos != std::string::npos);
    const size_t truth_pos = text.find("END", pos);
    text = text.substr(0, pos) + "FEATURES\nFROM_IMAGE tex.pgm\n" +
           text.substr(truth_pos);
    write_raw(dir.file("img.gci"), text);

    const InstanceFile loaded = read_instance(dir.file("img.gci"));
    const Image image = read_image_ppm(dir.file("tex.pgm"));
    const FeatureField expect =
        image_features(image, loaded.instance.features->theta_p,
                       loaded.instance.features->theta_c);
    CHECK((loaded.instance.features->values - expect.values).cwiseAbs().maxCoeff() ==
          0.0);
  }

  SUBCASE("malformed files are refused") {
    write_raw(dir.file("junk.gci"), "GRIDCRF-INSTANCE 1\nHEADER\nheight 2\n");
    CHECK_THROWS_AS(read_instance(dir.file("junk.gci")), IoError);
    write_raw(dir.file("vers.gci"), "GRIDCRF-INSTANCE 9\n");
    CHECK_THROWS_WITH_AS(read_instance(dir.file("vers.gci")),
                         doctest::Contains("version"), IoError);
  }
}

TEST_CASE("parameter files round-trip exactly") {
  TempDir dir;
  ParameterSet params = init_params(3, 2, 1, 0.37);
  params.unary_weight = 0.625;
  params.spatial.tap(0, 1, 2, -1) = 1.0 / 3.0;
  params.spatial.symmetrize();
  params.spatial.pin_self_taps();

  write_parameters(dir.file("model.gcp"), params);
  const ParameterSet loaded = read_parameters(dir.file("model.gcp"));
  CHECK(loaded.unary_weight == params.unary_weight);
  CHECK(loaded.spatial.taps == params.spatial.taps);
  REQUIRE(loaded.bilateral.has_value());
  CHECK(loaded.bilateral->taps == params.bilateral->taps);

  write_parameters(dir.file("again.gcp"), loaded);
  CHECK(slurp(dir.file("model.gcp")) == slurp(dir.file("again.gcp")));
}

TEST_CASE("trace csv layout") {
  TempDir dir;
  InferenceTrace trace;
  trace.method = "pgd";
  trace.energies = {3.0, 2.5, 2.25};
  trace.kl = {1.0, 0.5, 0.25};
  write_trace_csv(dir.file("trace.csv"), trace);
  CHECK(slurp(dir.file("trace.csv")) ==
        "step,relaxed_energy,kl_objective,method\n"
        "0,3,1,pgd\n"
        "1,2.5,0.5,pgd\n"
        "2,2.25,0.25,pgd\n");

  trace.kl.clear();  // undefined objective leaves the column empty
  write_trace_csv(dir.file("nokl.csv"), trace);
  CHECK(slurp(dir.file("nokl.csv")) ==
        "step,relaxed_energy,kl_objective,method\n"
        "0,3,,pgd\n"
        "1,2.5,,pgd\n"
        "2,2.25,,pgd\n");
}

TEST_CASE("filter heatmaps") {
  TempDir dir;

  SUBCASE("zero banks render uniform gray") {
    write_filter_heatmaps(SpatialKernelBank::zeros(2, 1), dir.file("flat"));
    const Image image = read_image_ppm(dir.file("flat") + "/filter_0_1.pgm");
    for (size_t i = 0; i < image.rgb.size(); i += 3) CHECK(image.rgb[i] == 128);
  }

  SUBCASE("symmetric pairs are 180-degree rotations") {
    SpatialKernelBank bank = SpatialKernelBank::zeros(2, 2);
    Rng rng(71);
    for (double& tap : bank.taps) tap = rng.uniform(-1.0, 1.0);
    bank.symmetrize();
    bank.pin_self_taps();
    write_filter_heatmaps(bank, dir.file("sym"));
    const Image a = read_image_ppm(dir.file("sym") + "/filter_0_1.pgm");
    const Image b = read_image_ppm(dir.file("sym") + "/filter_1_0.pgm");
    const int side = 5;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        CHECK(a.rgb[3 * (y * side + x)] ==
              b.rgb[3 * ((side - 1 - y) * side + (side - 1 - x))]);
  }

  SUBCASE("round-trip recovers taps to quantization error") {
    SpatialKernelBank bank = SpatialKernelBank::zeros(2, 1);
    Rng rng(72);
    for (double& tap : bank.taps) tap = rng.uniform(-2.0, 2.0);
    bank.pin_self_taps();
    write_filter_heatmaps(bank, dir.file("rt"));
    for (int lam = 0; lam < 2; ++lam)
      for (int mu = 0; mu < 2; ++mu) {
        const std::string stem = dir.file("rt") + "/filter_" +
                                 std::to_string(lam) + "_" + std::to_string(mu);
        const Image image = read_image_ppm(stem + ".pgm");
        std::ifstream meta(stem + ".txt");
        std::string key;
        double lo = 0.0, hi = 0.0;
        meta >> key >> lo >> key >> hi;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const double level = image.rgb[3 * ((dy + 1) * 3 + (dx + 1))];
            const double recovered = lo + level / 255.0 * (hi - lo);
            CHECK(std::abs(recovered - bank.tap(lam, mu, dx, dy)) <=
                  (hi - lo) / 255.0);
          }
      }
  }
}

TEST_CASE("label maps store raw labels") {
  TempDir dir;
  const GridGeometry geometry{2, 2, 0};
  write_label_map(dir.file("labels.pgm"), geometry, {0, 1, 2, 1});
  const Image image = read_image_ppm(dir.file("labels.pgm"));
  CHECK(image.rgb[0] == 0);
  CHECK(image.rgb[3] == 1);
  CHECK(image.rgb[6] == 2);
  CHECK(image.rgb[9] == 1);
}
