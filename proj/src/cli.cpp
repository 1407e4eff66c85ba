#include "lsilt/cli.hpp"

#include <chrono>
#include <ostream>

#include "CLI11.hpp"
#include "lsilt/io.hpp"
#include "lsilt/levelset.hpp"
#include "lsilt/litho.hpp"
#include "lsilt/metrics.hpp"
#include "lsilt/optimizer.hpp"

namespace lsilt {

namespace {

namespace fs = std::filesystem;

// Raw flag values; only flags that were actually given override the config file.
struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::string target, kernels, out_dir, mask, out, phi0, modulation, png_path;
  int size = 0;
  int max_iters = -1;
  std::uint64_t seed = 7;
  bool png = false;
  bool no_curvature = false;
  int side = 35;
  int count = 24;
};

void require_exists(const fs::path& p, const char* what) {
  if (p.empty()) throw InvalidArgument(std::string("missing ") + what + " path");
  if (!fs::exists(p)) throw InvalidArgument(std::string(what) + " not found: " + p.string());
}

RunConfig resolve(const Flags& f, const CLI::App& sub) {
  RunConfig run;
  auto given = [&](const char* name) {
    const CLI::Option* o = sub.get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (!f.config.empty()) {
    require_exists(f.config, "config file");
    for (const auto& [key, value] : parse_key_values(read_text(f.config))) {
      if (apply_config_value(key, value, run.opt)) continue;
      if (key == "kernels_path") run.kernels_path = value;
      else if (key == "target_path") run.target_path = value;
      else if (key == "out_dir") run.out_dir = value;
      else if (key == "seed") run.seed = std::stoull(value);
      else if (key == "emit_png") run.emit_png = value == "true" || value == "1";
      else if (key == "phi0_path") run.phi0_path = value;
      else if (key == "modulation_path") run.modulation_path = value;
      else throw InvalidArgument("unknown config key \"" + key + "\" in " + f.config);
    }
  }
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got \"" + kv + "\"");
    if (!apply_config_value(kv.substr(0, eq), kv.substr(eq + 1), run.opt)) {
      throw InvalidArgument("unknown setting \"" + kv.substr(0, eq) + "\"");
    }
  }
  if (given("--target")) run.target_path = f.target;
  if (given("--kernels")) run.kernels_path = f.kernels;
  if (given("--out-dir")) run.out_dir = f.out_dir;
  if (given("--seed")) run.seed = f.seed;
  if (given("--png")) run.emit_png = true;
  if (given("--phi0")) run.phi0_path = f.phi0;
  if (given("--modulation")) run.modulation_path = f.modulation;
  if (given("--size")) run.opt.grid_side = f.size;
  if (given("--max-iters")) run.opt.max_iters = f.max_iters;
  if (given("--no-curvature")) run.opt.use_curvature = false;
  run.opt.validate();
  return run;
}

BinaryGrid load_grid(const fs::path& path, int side, std::ostream& err) {
  std::vector<std::string> warnings;
  BinaryGrid grid = load_layout(path, side, &warnings);
  for (const auto& w : warnings) err << "warning: " << path.string() << ": " << w << "\n";
  return grid;
}

std::pair<KernelSet, KernelSet> load_kernel_file(const RunConfig& run) {
  require_exists(run.kernels_path, "kernel file");
  return load_kernels(run.kernels_path);
}

int cmd_gen_kernels(const Flags& f, std::ostream& out) {
  const auto [focus, defocus] = gen_synthetic_kernels(f.side, f.count, f.seed);
  const fs::path path = f.out.empty() ? fs::path("kernels.dvlk") : fs::path(f.out);
  save_kernels(path, focus, defocus);
  out << "wrote " << path.string() << " (" << f.count << " kernels of side " << f.side << " per condition)\n";
  return kExitOk;
}

int cmd_tsdf(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const RunConfig run = resolve(f, sub);
  require_exists(run.target_path, "target");
  const BinaryGrid target = load_grid(run.target_path, run.opt.grid_side, err);
  const LevelSetField phi = tsdf_from_mask(target, run.opt.D_u, run.opt.D_l);
  const fs::path path = f.out.empty() ? fs::path("phi.f64") : fs::path(f.out);
  dump_field(path, phi.phi);
  if (!f.png_path.empty()) write_png(f.png_path, mask_from_phi(phi), &target);
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_simulate(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const RunConfig run = resolve(f, sub);
  require_exists(f.mask, "mask");
  const BinaryGrid mask = load_grid(f.mask, run.opt.grid_side, err);
  const auto [focus, defocus] = load_kernel_file(run);
  const auto prints = print_corners_hard(to_scalar(mask), focus, defocus, run.opt);
  fs::create_directories(run.out_dir);
  write_pgm(run.out_dir / "nominal.pgm", prints.nominal);
  write_pgm(run.out_dir / "inner.pgm", prints.inner);
  write_pgm(run.out_dir / "outer.pgm", prints.outer);
  if (run.emit_png) {
    write_png(run.out_dir / "nominal.png", prints.nominal, &mask);
    write_png(run.out_dir / "inner.png", prints.inner, &mask);
    write_png(run.out_dir / "outer.png", prints.outer, &mask);
  }
  out << "wrote nominal/inner/outer prints to " << run.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_optimize(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const RunConfig run = resolve(f, sub);
  require_exists(run.target_path, "target");
  const BinaryGrid target = load_grid(run.target_path, run.opt.grid_side, err);
  const auto [focus, defocus] = load_kernel_file(run);

  std::optional<LevelSetField> phi0;
  if (run.phi0_path) {
    require_exists(*run.phi0_path, "initial level set");
    phi0 = LevelSetField{load_field(*run.phi0_path), run.opt.D_u, run.opt.D_l};
  }
  std::optional<ModulationField> modulation;
  if (run.modulation_path) {
    require_exists(*run.modulation_path, "modulation map");
    modulation = ModulationField{load_field(*run.modulation_path)};
  }

  const OptimizationResult result = optimize(target, phi0, modulation, focus, defocus, run.opt);
  fs::create_directories(run.out_dir);
  write_pgm(run.out_dir / "mask.pgm", result.final_mask);
  dump_field(run.out_dir / "phi.f64", result.final_phi.phi);
  write_text(run.out_dir / "metrics.json", metrics_json(result.metrics, result.iters_run));
  write_text(run.out_dir / "loss.csv", loss_csv(result.loss_history));
  if (run.emit_png) write_png(run.out_dir / "mask.png", result.final_mask, &target);
  out << metrics_json(result.metrics, result.iters_run);
  return kExitOk;
}

int cmd_metrics(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig run = resolve(f, sub);
  require_exists(f.mask, "mask");
  require_exists(run.target_path, "target");
  const BinaryGrid mask = load_grid(f.mask, run.opt.grid_side, err);
  const BinaryGrid target = load_grid(run.target_path, mask.width(), err);
  const auto [focus, defocus] = load_kernel_file(run);
  const LithoSimulator sim(focus, defocus, mask.width(), mask.height());
  MetricsReport report = evaluate_mask(sim, mask, target, run.opt);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const std::string json = metrics_json(report, 0);
  if (!f.out.empty()) write_text(f.out, json);
  out << json;
  return kExitOk;
}

int cmd_fracture(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const RunConfig run = resolve(f, sub);
  require_exists(f.mask, "mask");
  const BinaryGrid mask = load_grid(f.mask, run.opt.grid_side, err);
  std::string csv = "x,y,w,h\n";
  for (const auto& r : fracture(mask)) {
    csv += std::to_string(r.x) + "," + std::to_string(r.y) + "," + std::to_string(r.w) + "," + std::to_string(r.h) +
           "\n";
  }
  if (f.out.empty()) {
    out << csv;
  } else {
    write_text(f.out, csv);
  }
  return kExitOk;
}

void add_run_options(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "key = value run configuration file");
  sub->add_option("--set", f.sets, "override one setting, e.g. --set beta=5");
  sub->add_option("--size", f.size, "grid side in pixels (rasterizes text layouts)")->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Level-set inverse lithography mask optimizer", "lsilt"};
  app.require_subcommand(1, 1);
  Flags f;

  auto* gen = app.add_subcommand("gen-kernels", "write a synthetic DVLK1 kernel file");
  gen->add_option("--side", f.side, "kernel side K (odd)");
  gen->add_option("--count", f.count, "kernels per condition");
  gen->add_option("--seed", f.seed, "generator seed");
  gen->add_option("--out", f.out, "output path (default kernels.dvlk)");

  auto* tsdf = app.add_subcommand("tsdf", "write the truncated signed distance of a layout");
  tsdf->add_option("--target", f.target, "layout or PGM target")->required();
  tsdf->add_option("--out", f.out, "DVLF1 output path (default phi.f64)");
  tsdf->add_option("--png", f.png_path, "optional PNG rendering of the zero level");
  add_run_options(tsdf, f);

  auto* simulate = app.add_subcommand("simulate", "print a mask at the nominal, inner and outer corners");
  simulate->add_option("--mask", f.mask, "mask (PGM or layout)")->required();
  simulate->add_option("--kernels", f.kernels, "DVLK1 kernel file");
  simulate->add_option("--out-dir", f.out_dir, "output directory");
  simulate->add_flag("--png", f.png, "also write PNG renderings");
  add_run_options(simulate, f);

  auto* opt = app.add_subcommand("optimize", "run the level-set mask optimization");
  opt->add_option("--target", f.target, "layout or PGM target");
  opt->add_option("--kernels", f.kernels, "DVLK1 kernel file");
  opt->add_option("--out-dir", f.out_dir, "output directory");
  opt->add_option("--phi0", f.phi0, "initial level set (DVLF1)");
  opt->add_option("--modulation", f.modulation, "curvature modulation map (DVLF1)");
  opt->add_option("--max-iters", f.max_iters, "iteration cap")->check(CLI::NonNegativeNumber);
  opt->add_option("--seed", f.seed, "run seed");
  opt->add_flag("--no-curvature", f.no_curvature, "disable the curvature term");
  opt->add_flag("--png", f.png, "also write mask.png");
  add_run_options(opt, f);

  auto* metrics = app.add_subcommand("metrics", "L2, PVBand and shot count of a mask against a target");
  metrics->add_option("--mask", f.mask, "mask (PGM or layout)")->required();
  metrics->add_option("--target", f.target, "layout or PGM target");
  metrics->add_option("--kernels", f.kernels, "DVLK1 kernel file");
  metrics->add_option("--out", f.out, "also write the JSON here");
  add_run_options(metrics, f);

  auto* frac = app.add_subcommand("fracture", "fracture a mask into rectangles (CSV x,y,w,h)");
  frac->add_option("--mask", f.mask, "mask (PGM or layout)")->required();
  frac->add_option("--out", f.out, "CSV output path (default standard output)");
  add_run_options(frac, f);

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("lsilt");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) return cmd_gen_kernels(f, out);
    if (*tsdf) return cmd_tsdf(f, *tsdf, out, err);
    if (*simulate) return cmd_simulate(f, *simulate, out, err);
    if (*opt) return cmd_optimize(f, *opt, out, err);
    if (*metrics) return cmd_metrics(f, *metrics, out, err);
    if (*frac) return cmd_fracture(f, *frac, out, err);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace lsilt
