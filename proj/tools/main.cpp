// spdc-epr: simulate photon-pair camera frame stacks, estimate JPD
// projections, and certify EPR entanglement from the fitted widths.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spdc/pipeline.hpp"
#include "spdc/svg.hpp"
#include "spdc/version.hpp"

namespace fs = std::filesystem;
using namespace spdc;

namespace {

int default_threads() {
  if (const char* env = std::getenv("SPDC_EPR_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;  // hardware concurrency
}

std::vector<double> parse_csv_list(const std::string& text) {
  std::vector<double> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
      throw std::invalid_argument("'" + token + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

KeyValues config_from_args(const std::string& config_path, const std::string& manifest_path) {
  if (!manifest_path.empty()) return read_manifest(manifest_path).config;
  if (!config_path.empty()) return parse_config_file(config_path);
  throw std::invalid_argument("need a config file or --from-manifest");
}

void write_text(const std::string& path, const std::string& text) {
  iodetail::write_file(path, text);
}

struct ManifestArgs {
  std::string command;
  std::map<std::string, std::string> args;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, std::string> notes;
};

void emit_manifest(const RunConfig& config, const ManifestArgs& desc, const std::string& path) {
  RunManifest m;
  m.command = desc.command;
  m.args = desc.args;
  m.config = config.resolved;
  m.config_sha256 = Sha256::hex(config.hash());
  m.master_seed = config.seed;
  for (const auto& p : desc.inputs) m.inputs.emplace_back(p, Sha256::hex(file_sha256(p)));
  for (const auto& p : desc.outputs) m.outputs.emplace_back(p, Sha256::hex(file_sha256(p)));
  m.notes = desc.notes;
  write_manifest(path, m);
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& manifest_path,
                 const std::string& out, const std::string& basis_override, int frames_override,
                 long long seed_override, int threads) {
  KeyValues raw = config_from_args(config_path, manifest_path);
  if (!basis_override.empty()) raw["run.basis"] = basis_override;
  if (frames_override > 0) raw["run.frames"] = std::to_string(frames_override);
  if (seed_override >= 0) raw["run.seed"] = std::to_string(seed_override);
  const RunConfig config = resolve_run_config(raw);
  for (const auto& w : config.warnings) std::cerr << "warning: " << w << "\n";

  FrameStack stack = simulate_from_config(config, threads);
  write_bpfs(out, stack);
  const SimulateSummary summary = summarize_stack(stack);
  RunManifest m = make_stack_manifest(config, out, summary);
  m.args["config"] = config_path.empty() ? manifest_path : config_path;
  write_manifest(manifest_path_for(out), m);

  std::printf("wrote %s: %u %s-basis frames (%dx%d px)\n", out.c_str(), summary.n_frames,
              basis_name(config.basis), config.sensor.width_px, config.sensor.height_px);
  std::printf("mean lit pixels per frame: %.3f\n", summary.mean_lit_per_frame);
  std::printf("dropped photon fraction:   %.5f\n", summary.dropped_fraction);
  std::printf("manifest: %s\n", manifest_path_for(out).c_str());
  return 0;
}

int cmd_project(const std::string& stack_path, const std::string& kind_name,
                const std::string& config_path, const std::string& out, int threads) {
  const AxisKind kind = parse_kind(kind_name);
  LoadedStack loaded = load_stack(stack_path, config_path.empty()
                                                  ? std::nullopt
                                                  : std::optional<std::string>(config_path));
  ProjectionOptions opts = loaded.config.estimator;
  opts.threads = threads;
  const ProjectionResult result = project_stack(loaded.stack, kind, loaded.config.optics, opts);

  write_projection(out, result.projection);
  write_projection_csv(out + ".csv", result.projection);
  write_heatmap_svg(out + ".svg", result.projection,
                    std::string("projection: ") + axis_kind_name(kind));
  ManifestArgs margs;
  margs.command = "project";
  margs.args = {{"stack", stack_path}, {"kind", kind_name}, {"out", out}};
  margs.inputs = {stack_path};
  margs.outputs = {out, out + ".csv", out + ".svg"};
  if (kind == AxisKind::CorrectedSumMomentum) {
    margs.notes["tilt_angle_rad"] = format1(
        "%.6f", tilt_angle(loaded.config.optics.lambda_signal, loaded.config.optics.lambda_idler));
  }
  emit_manifest(loaded.config, margs, manifest_path_for(out));

  std::printf("wrote %s (+.csv, +.svg): %dx%d bins, axis %s\n", out.c_str(),
              result.projection.rows, result.projection.cols, axis_kind_name(kind));
  if (kind == AxisKind::CorrectedSumMomentum)
    std::printf("tilt angle alpha: %s rad\n", margs.notes["tilt_angle_rad"].c_str());
  return 0;
}

int cmd_certify(const std::string& minus_path, const std::string& momentum_path,
                const std::string& config_path, const std::string& out_prefix,
                double threshold_sigma, const std::string& fit_shape) {
  FitShape shape;
  if (fit_shape == "2d")
    shape = FitShape::Isotropic2D;
  else if (fit_shape == "radial")
    shape = FitShape::Radial1D;
  else
    throw std::invalid_argument("--fit-shape must be '2d' or 'radial'");
  const RunConfig config = load_run_config(config_path);
  ProjectionResult minus, momentum;
  minus.projection = read_projection(minus_path);
  momentum.projection = read_projection(momentum_path);
  if (minus.projection.axis_kind != AxisKind::MinusPosition)
    throw std::invalid_argument(minus_path + " holds a '" +
                                axis_kind_name(minus.projection.axis_kind) +
                                "' projection; the first input must be a minus projection");
  if (momentum.projection.axis_kind == AxisKind::MinusPosition)
    throw std::invalid_argument(momentum_path +
                                " holds a minus projection; the second input must be a sum or "
                                "corrected-sum projection");

  const CertifySummary summary = certify_projections(minus, momentum, config, threshold_sigma, shape);
  const std::string text = epr_report_text(summary, config);
  std::fputs(text.c_str(), stdout);
  if (!out_prefix.empty()) {
    write_text(out_prefix + ".txt", text);
    write_text(out_prefix + ".csv",
               epr_csv_header() +
                   epr_csv_row(summary.report, config,
                               summary.momentum_kind == AxisKind::CorrectedSumMomentum
                                   ? "corrected"
                                   : "uncorrected"));
    ManifestArgs margs;
    margs.command = "certify";
    margs.args = {{"minus", minus_path}, {"momentum", momentum_path}, {"config", config_path}};
    margs.inputs = {minus_path, momentum_path};
    margs.outputs = {out_prefix + ".txt", out_prefix + ".csv"};
    emit_manifest(config, margs, out_prefix + ".manifest.json");
  }
  return 0;  // the verdict is data, not an exit status
}

int cmd_sweep(const std::string& config_path, const std::string& manifest_path,
              const std::string& waists_csv, const std::string& crystals_csv, int frames,
              long long seed, const std::string& out_dir, double threshold_sigma, int threads) {
  const RunConfig base = resolve_run_config(config_from_args(config_path, manifest_path));
  SweepRequest request;
  request.waists_um = parse_csv_list(waists_csv);
  request.crystals_mm = parse_csv_list(crystals_csv);
  request.frames = static_cast<uint32_t>(frames);
  request.seed = seed >= 0 ? static_cast<uint64_t>(seed) : base.seed;
  request.threads = threads;
  request.threshold_sigma = threshold_sigma;

  fs::create_directories(out_dir);
  const SweepResult result =
      run_sweep(base, request, [](const std::string& msg) { std::printf("%s\n", msg.c_str()); });

  std::string csv = epr_csv_header();
  std::vector<SweepSeries> series;
  std::map<double, SweepSeries> corrected_series, uncorrected_series;
  static const char* palette[] = {"#c0392b", "#2c3e90", "#1e8449", "#7d3c98"};
  int color_idx = 0;
  size_t failures = 0;
  for (const auto& point : result.points) {
    if (point.failed) {
      ++failures;
      std::fprintf(stderr, "point (waist %g um, crystal %g mm) failed: %s\n", point.waist_um,
                   point.crystal_mm, point.error.c_str());
      continue;
    }
    csv += epr_csv_row(point.corrected, point.momentum_config, "corrected");
    csv += epr_csv_row(point.uncorrected, point.momentum_config, "uncorrected");
    char name[96];
    std::snprintf(name, sizeof(name), "%s/point_w%g_L%g.txt", out_dir.c_str(), point.waist_um,
                  point.crystal_mm);
    CertifySummary view;  // render both variants into one per-point report
    std::string point_text = "corrected variant\n=================\n";
    view.report = point.corrected;
    view.momentum_kind = AxisKind::CorrectedSumMomentum;
    point_text += epr_report_text(view, point.momentum_config);
    point_text += "\nuncorrected variant\n===================\n";
    view.report = point.uncorrected;
    view.momentum_kind = AxisKind::SumMomentum;
    point_text += epr_report_text(view, point.momentum_config);
    write_text(name, point_text);

    if (!corrected_series.count(point.crystal_mm)) {
      SweepSeries s;
      s.label = format1("%g mm, corrected", point.crystal_mm);
      s.color = palette[color_idx % 4];
      s.circles = true;
      corrected_series[point.crystal_mm] = s;
      s.label = format1("%g mm, uncorrected", point.crystal_mm);
      s.circles = false;
      uncorrected_series[point.crystal_mm] = s;
      ++color_idx;
    }
    corrected_series[point.crystal_mm].points.push_back(
        {point.waist_um, point.corrected.product, point.corrected.product_sigma});
    uncorrected_series[point.crystal_mm].points.push_back(
        {point.waist_um, point.uncorrected.product, point.uncorrected.product_sigma});
  }
  if (failures == result.points.size()) {
    std::fprintf(stderr, "all sweep points failed\n");
    return 1;
  }

  std::string summary_text = "scaling-law fits: product = a / waist\n";
  for (const auto& fit : result.fits) {
    for (auto& [crystal, s] : corrected_series)
      if (crystal == fit.crystal_mm) s.fit_a = fit.corrected.a;
    summary_text += format1("crystal %g mm: ", fit.crystal_mm) + "a = " +
                    with_uncertainty(fit.corrected.a, fit.corrected.a_sigma) + " um*hbar" +
                    " (injected delta_r " + format1("%.4g um)", fit.injected_delta_r_um) + "\n";
  }
  if (result.crystal_ratio > 0) {
    summary_text += "ratio a(longer)/a(shorter) = " +
                    with_uncertainty(result.crystal_ratio, result.crystal_ratio_sigma) +
                    " (sqrt(2) = 1.414 expected for delta_r ~ sqrt(L))\n";
  }
  std::fputs(summary_text.c_str(), stdout);

  const std::string table_path = out_dir + "/sweep_table.csv";
  write_text(table_path, csv);
  write_text(out_dir + "/sweep_summary.txt", summary_text);
  for (auto& [crystal, s] : corrected_series) series.push_back(s);
  for (auto& [crystal, s] : uncorrected_series) series.push_back(s);
  write_sweep_svg(out_dir + "/sweep_products.svg", series, "EPR product vs pump waist");

  ManifestArgs margs;
  margs.command = "sweep";
  margs.args = {{"config", config_path.empty() ? manifest_path : config_path},
                {"waists", waists_csv},
                {"crystals", crystals_csv},
                {"frames", std::to_string(frames)},
                {"seed", std::to_string(request.seed)},
                {"out-dir", out_dir}};
  margs.outputs = {table_path, out_dir + "/sweep_summary.txt", out_dir + "/sweep_products.svg"};
  margs.notes["marginal_scale_calibration"] =
      base.resolved.count("state.marginal_scale") ? base.resolved.at("state.marginal_scale") : "n/a";
  RunConfig manifest_config = base;
  emit_manifest(manifest_config, margs, table_path + ".manifest.json");
  std::printf("wrote %s, sweep_summary.txt, sweep_products.svg and per-point reports under %s\n",
              table_path.c_str(), out_dir.c_str());
  return 0;
}

int cmd_oracle(const std::string& stack_path, const std::string& kind_name,
               const std::string& config_path, int threads) {
  const AxisKind kind = parse_kind(kind_name);
  LoadedStack loaded = load_stack(stack_path, config_path.empty()
                                                  ? std::nullopt
                                                  : std::optional<std::string>(config_path));
  ProjectionOptions opts = loaded.config.estimator;
  opts.threads = threads;
  const OracleComparison cmp = compare_with_oracle(loaded.stack, kind, loaded.config.optics, opts);
  std::printf("kind: %s\n", axis_kind_name(kind));
  std::printf("max abs deviation:      %.6e\n", cmp.max_abs);
  std::printf("max rel deviation:      %.6e\n", cmp.max_rel);
  std::printf("rms / peak height:      %.6e\n", cmp.rms_over_peak);
  std::printf("tolerance (%s): %.3e\n",
              kind == AxisKind::CorrectedSumMomentum ? "rms/peak" : "relative", cmp.tolerance);
  std::printf("%s\n", cmp.pass ? "PASS" : "FAIL");
  return cmp.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPDC photon-pair simulator and EPR entanglement analyzer"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.fallthrough();  // allow --threads after the subcommand name
  int threads = default_threads();
  app.add_option("--threads", threads,
                 "worker threads (0 = hardware; results are identical for any value)");

  std::string config_path, manifest_path, out, basis_override, kind_name, stack_path;
  std::string minus_path, momentum_path, out_prefix, out_dir;
  std::string waists_csv = "60,80,140,160", crystals_csv = "5,10";
  int frames_override = 0, sweep_frames = 10000;
  long long seed_override = -1, sweep_seed = -1;
  double threshold_sigma = 3.0;

  auto* simulate = app.add_subcommand("simulate", "synthesize a frame stack (BPFS) from a config");
  simulate->add_option("config", config_path, "config file (flat dotted keys)");
  simulate->add_option("--from-manifest", manifest_path, "re-run from a manifest's recorded config");
  simulate->add_option("--out", out, "output stack path")->required();
  simulate->add_option("--basis", basis_override, "override run.basis (position|momentum)");
  simulate->add_option("--frames", frames_override, "override run.frames");
  simulate->add_option("--seed", seed_override, "override run.seed");

  auto* project = app.add_subcommand("project", "estimate a JPD projection from a stack");
  project->add_option("stack", stack_path, "input BPFS stack")->required();
  project->add_option("--kind", kind_name, "minus | sum | corrected-sum")->required();
  project->add_option("--config", config_path, "config file (default: the stack's sidecar manifest)");
  project->add_option("--out", out, "output projection path (.csv and .svg are added)")->required();

  auto* certify = app.add_subcommand("certify", "fit projections and compute the EPR product");
  certify->add_option("--minus", minus_path, "minus-coordinate projection file")->required();
  certify->add_option("--momentum", momentum_path, "sum or corrected-sum projection file")->required();
  certify->add_option("--config", config_path, "config file (for unit conversions)")->required();
  certify->add_option("--out", out_prefix, "output prefix for .txt/.csv reports");
  certify->add_option("--threshold-sigma", threshold_sigma, "significance threshold for the verdict");
  std::string fit_shape = "2d";
  certify->add_option("--fit-shape", fit_shape, "peak model: 2d (isotropic) or radial");

  auto* sweep = app.add_subcommand("sweep", "full pipeline over a waist x crystal grid");
  sweep->add_option("config", config_path, "config file with sensor.* and position_sensor.* blocks");
  sweep->add_option("--from-manifest", manifest_path, "re-run from a manifest's recorded config");
  sweep->add_option("--waists", waists_csv, "pump waists [um], comma separated");
  sweep->add_option("--crystals", crystals_csv, "crystal lengths [mm], comma separated");
  sweep->add_option("--frames", sweep_frames, "frames per sweep point");
  sweep->add_option("--seed", sweep_seed, "sweep master seed (default: run.seed)");
  sweep->add_option("--out-dir", out_dir, "output directory")->required();
  sweep->add_option("--threshold-sigma", threshold_sigma, "significance threshold for verdicts");

  auto* oracle = app.add_subcommand("oracle", "compare the FFT path against the brute-force oracle");
  oracle->add_option("stack", stack_path, "input BPFS stack (ROI area <= 4096 px)")->required();
  oracle->add_option("--kind", kind_name, "minus | sum | corrected-sum")->required();
  oracle->add_option("--config", config_path, "config file (default: the stack's sidecar manifest)");

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed())
      return cmd_simulate(config_path, manifest_path, out, basis_override, frames_override,
                          seed_override, threads);
    if (project->parsed()) return cmd_project(stack_path, kind_name, config_path, out, threads);
    if (certify->parsed())
      return cmd_certify(minus_path, momentum_path, config_path, out_prefix, threshold_sigma,
                         fit_shape);
    if (sweep->parsed())
      return cmd_sweep(config_path, manifest_path, waists_csv, crystals_csv, sweep_frames,
                       sweep_seed, out_dir, threshold_sigma, threads);
    if (oracle->parsed()) return cmd_oracle(stack_path, kind_name, config_path, threads);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
