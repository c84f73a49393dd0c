#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "spdc/config.hpp"
#include "spdc/io.hpp"
#include "spdc/manifest.hpp"
#include "spdc/pipeline.hpp"
#include "spdc/sha256.hpp"
#include "spdc/synth.hpp"

using namespace spdc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("spdc_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

const char* kSampleConfig = R"(
# table-1 style run
optics.lambda_pump_nm = 405
optics.lambda_signal_nm = 910
optics.lambda_idler_nm = 730
optics.pump_waist_um = 60
optics.crystal_length_mm = 5
optics.magnification = 3
optics.fourier_focal_mm = 33.333333333333336
state.mode = explicit
state.sigma_minus_pos_um = 7.5
state.sigma_plus_mom_hbar_mm = 24.6
state.sigma_plus_pos_um = 75
state.sigma_minus_mom_hbar_mm = 246
sensor.pixel_pitch_um = 48
sensor.width_px = 40
sensor.height_px = 20
sensor.roi_signal = 0,0,19,19
sensor.roi_idler = 20,0,19,19
sensor.quantum_efficiency = 0.6
sensor.dark_count_prob = 0.001
sensor.mean_pairs_per_frame = 2
run.basis = momentum
run.frames = 16
run.seed = 7
)";

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(Sha256::hex(Sha256::hash(std::string(""))) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256::hex(Sha256::hash(std::string("abc"))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // multi-block message
  CHECK(Sha256::hex(Sha256::hash(std::string(
            "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("bpfs golden header layout") {
  TempDir tmp;
  SensorModel sensor;
  sensor.pixel_pitch = from_um(16);
  sensor.width_px = 3;
  sensor.height_px = 2;
  sensor.roi_signal = {0, 0, 1, 2};
  sensor.roi_idler = {2, 0, 1, 2};
  std::array<uint8_t, 32> hash{};
  for (int i = 0; i < 32; ++i) hash[i] = static_cast<uint8_t>(i);
  FrameStack stack = FrameStack::create(sensor, Basis::Momentum, 1, 0x0102030405060708ull, hash);
  stack.set_pixel(0, 0, 0);  // bit 0
  stack.set_pixel(0, 2, 1);  // pixel index 5 -> bit 5
  const std::string path = tmp.file("golden.bpfs");
  write_bpfs(path, stack);

  const auto data = iodetail::read_file(path);
  REQUIRE(data.size() == 55 + 1);
  const uint8_t expected[55] = {
      'B', 'P', 'F', 'S',
      0x01, 0x00,              // version 1
      0x03, 0x00,              // width 3
      0x02, 0x00,              // height 2
      0x01, 0x00, 0x00, 0x00,  // one frame
      0x01,                    // momentum basis
      0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01,  // seed, little-endian
      0,  1,  2,  3,  4,  5,  6,  7,  8,  9,  10, 11, 12, 13, 14, 15,
      16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31};
  for (size_t i = 0; i < 55; ++i) CHECK(data[i] == expected[i]);
  CHECK(data[55] == 0b00100001);  // bits 0 and 5
}

TEST_CASE("bpfs round trip preserves every bit and all metadata") {
  TempDir tmp;
  Rng rng(1234);
  for (int iter = 0; iter < 10; ++iter) {
    SensorModel sensor;
    sensor.pixel_pitch = from_um(16);
    const int roi = 3 + static_cast<int>(rng.next_double() * 12);
    sensor.width_px = 2 * roi + 1;
    sensor.height_px = roi + static_cast<int>(rng.next_double() * 4);
    sensor.roi_signal = {0, 0, roi, roi};
    sensor.roi_idler = {roi + 1, 0, roi, roi};
    const uint32_t frames = 1 + static_cast<uint32_t>(rng.next_double() * 20);
    const Basis basis = rng.next_bernoulli(0.5) ? Basis::Momentum : Basis::Position;
    std::array<uint8_t, 32> hash{};
    for (auto& b : hash) b = static_cast<uint8_t>(rng.next_u64());
    FrameStack stack = FrameStack::create(sensor, basis, frames, rng.next_u64(), hash);
    for (uint32_t f = 0; f < frames; ++f)
      for (int y = 0; y < sensor.height_px; ++y)
        for (int x = 0; x < sensor.width_px; ++x)
          if (rng.next_bernoulli(0.2)) stack.set_pixel(f, x, y);

    const std::string path = tmp.file("roundtrip.bpfs");
    write_bpfs(path, stack);
    const FrameStack back = read_bpfs(path, sensor);
    CHECK(back.basis() == stack.basis());
    CHECK(back.seed() == stack.seed());
    CHECK(back.config_hash() == stack.config_hash());
    CHECK(back.n_frames() == stack.n_frames());
    REQUIRE(back.raw_data().size() == stack.raw_data().size());
    CHECK(std::equal(back.raw_data().begin(), back.raw_data().end(), stack.raw_data().begin()));
  }
}

TEST_CASE("bpfs error paths") {
  TempDir tmp;
  SensorModel sensor;
  sensor.pixel_pitch = from_um(16);
  sensor.width_px = 9;
  sensor.height_px = 4;
  sensor.roi_signal = {0, 0, 4, 4};
  sensor.roi_idler = {5, 0, 4, 4};
  FrameStack stack = FrameStack::create(sensor, Basis::Position, 2, 1);
  const std::string path = tmp.file("err.bpfs");
  write_bpfs(path, stack);

  SUBCASE("bad magic") {
    auto bytes = iodetail::read_file(path);
    bytes[0] = 'X';
    iodetail::write_file(path, std::string(bytes.begin(), bytes.end()));
    CHECK_THROWS_WITH_AS(read_bpfs(path, sensor), doctest::Contains("magic"), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    auto bytes = iodetail::read_file(path);
    bytes.resize(bytes.size() - 1);
    iodetail::write_file(path, std::string(bytes.begin(), bytes.end()));
    CHECK_THROWS(read_bpfs(path, sensor));
  }
  SUBCASE("sensor dimension mismatch") {
    SensorModel other = sensor;
    other.width_px = 11;
    other.roi_idler = {6, 0, 4, 4};
    CHECK_THROWS_WITH_AS(read_bpfs(path, other), doctest::Contains("do not match"),
                         std::runtime_error);
  }
}

TEST_CASE("projection container round trip") {
  TempDir tmp;
  Projection p;
  p.axis_kind = AxisKind::CorrectedSumMomentum;
  p.rows = 5;
  p.cols = 7;
  p.center_row = 2.0;
  p.center_col = 3.371;  // fractional center (corrected axis)
  p.bin_size = 48e-6 / 910e-9;
  p.units = "qalpha";
  p.values.resize(35);
  for (size_t i = 0; i < p.values.size(); ++i) p.values[i] = std::sin(static_cast<double>(i)) * 1e-3;
  const std::string path = tmp.file("proj.bppj");
  write_projection(path, p);
  const Projection q = read_projection(path);
  CHECK(q.axis_kind == p.axis_kind);
  CHECK(q.rows == p.rows);
  CHECK(q.cols == p.cols);
  CHECK(q.center_row == p.center_row);
  CHECK(q.center_col == p.center_col);
  CHECK(q.bin_size == p.bin_size);
  CHECK(q.units == p.units);
  CHECK(q.values == p.values);  // bit-exact

  write_projection_csv(tmp.file("proj.csv"), p);
  const auto csv = iodetail::read_file(tmp.file("proj.csv"));
  const std::string text(csv.begin(), csv.end());
  CHECK(static_cast<int>(std::count(text.begin(), text.end(), '\n')) == p.rows * p.cols + 1);
  CHECK(text.rfind("du,dv,value\n", 0) == 0);
}

TEST_CASE("config parsing and resolution") {
  const KeyValues raw = parse_config_text(kSampleConfig, "sample");
  const RunConfig config = resolve_run_config(raw);
  CHECK(config.optics.lambda_signal == doctest::Approx(910e-9));
  CHECK(config.state.sigma_plus_mom == doctest::Approx(24600.0));
  CHECK(config.sensor.roi_idler.x0 == 20);
  CHECK(config.basis == Basis::Momentum);
  CHECK(config.frames == 16);
  CHECK(config.seed == 7);
  CHECK(config.estimator.chunks == 32);  // default applied
  CHECK(config.resolved.count("estimator.accidentals") == 1);

  SUBCASE("unknown keys are named in the error") {
    KeyValues bad = raw;
    bad["optics.lambda_signa_nm"] = "910";
    CHECK_THROWS_WITH_AS(resolve_run_config(bad), doctest::Contains("optics.lambda_signa_nm"),
                         std::invalid_argument);
  }
  SUBCASE("missing required keys are named") {
    KeyValues bad = raw;
    bad.erase("sensor.roi_signal");
    CHECK_THROWS_WITH_AS(resolve_run_config(bad), doctest::Contains("sensor.roi_signal"),
                         std::invalid_argument);
  }
  SUBCASE("malformed values are rejected") {
    KeyValues bad = raw;
    bad["run.frames"] = "sixteen";
    CHECK_THROWS(resolve_run_config(bad));
    bad = raw;
    bad["sensor.roi_signal"] = "0,0,19";
    CHECK_THROWS(resolve_run_config(bad));
  }
  SUBCASE("state mode cross-checks") {
    KeyValues bad = raw;
    bad["state.c_p"] = "1.4";  // not valid alongside explicit widths
    CHECK_THROWS_WITH_AS(resolve_run_config(bad), doctest::Contains("state.c_p"),
                         std::invalid_argument);
    bad = raw;
    bad["state.mode"] = "derived";  // sigma keys now invalid
    CHECK_THROWS(resolve_run_config(bad));
    bad = raw;
    bad.erase("state.sigma_plus_pos_um");
    CHECK_THROWS_WITH_AS(resolve_run_config(bad), doctest::Contains("state.sigma_plus_pos_um"),
                         std::invalid_argument);
  }
  SUBCASE("position_sensor block is all-or-nothing") {
    KeyValues bad = raw;
    bad["position_sensor.pixel_pitch_um"] = "16";
    CHECK_THROWS_WITH_AS(resolve_run_config(bad), doctest::Contains("position_sensor"),
                         std::invalid_argument);
  }
  SUBCASE("duplicate keys rejected at parse time") {
    CHECK_THROWS(parse_config_text("a.b = 1\na.b = 2\n", "dup"));
    CHECK_THROWS(resolve_run_config(parse_config_text("a.b = 1", "x")));
  }
  SUBCASE("hash covers values, not formatting") {
    RunConfig again = resolve_run_config(raw);
    CHECK(Sha256::hex(again.hash()) == Sha256::hex(config.hash()));
    KeyValues changed = raw;
    changed["run.seed"] = "8";
    CHECK(Sha256::hex(resolve_run_config(changed).hash()) != Sha256::hex(config.hash()));
  }
}

TEST_CASE("manifest round trip and stack loading") {
  TempDir tmp;
  const KeyValues raw = parse_config_text(kSampleConfig, "sample");
  const RunConfig config = resolve_run_config(raw);
  FrameStack stack = simulate_from_config(config, 1);
  const std::string stack_path = tmp.file("run.bpfs");
  write_bpfs(stack_path, stack);
  RunManifest manifest = make_stack_manifest(config, stack_path, summarize_stack(stack));
  write_manifest(manifest_path_for(stack_path), manifest);

  const RunManifest back = read_manifest(manifest_path_for(stack_path));
  CHECK(back.command == "simulate");
  CHECK(back.config == config.resolved);
  CHECK(back.config_sha256 == Sha256::hex(config.hash()));
  REQUIRE(back.outputs.size() == 1);
  CHECK(back.outputs[0].second == Sha256::hex(file_sha256(stack_path)));

  SUBCASE("load_stack uses the sidecar and verifies the hash") {
    const LoadedStack loaded = load_stack(stack_path);
    CHECK(loaded.stack.n_frames() == config.frames);
    CHECK(loaded.config.resolved == config.resolved);
  }
  SUBCASE("a mismatched config is refused") {
    KeyValues other = raw;
    other["run.seed"] = "8";
    const std::string other_path = tmp.file("other.cfg");
    std::string text;
    for (const auto& [k, v] : other) text += k + " = " + v + "\n";
    iodetail::write_file(other_path, text);
    CHECK_THROWS_WITH_AS(load_stack(stack_path, other_path), doctest::Contains("hash"),
                         std::runtime_error);
  }
}
