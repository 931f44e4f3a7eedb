#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "exaq/bench.hpp"
#include "exaq/clip_optimizer.hpp"
#include "exaq/error.hpp"
#include "exaq/gaussian_mse.hpp"
#include "exaq/lut.hpp"
#include "exaq/quantizer.hpp"
#include "exaq/softmax.hpp"
#include "exaq/tensor_io.hpp"

namespace exaq::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Previously reported runtime reduction, printed next to the local measurement.
constexpr double kPublishedRuntimeReductionPercent = 36.9;

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::uint64_t default_seed() {
  if (const char* env = std::getenv("EXAQ_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "EXAQ_SEED is not an unsigned integer");
    }
  }
  return 1;
}

std::vector<fs::path> list_tensor_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io_failure, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::empty_input, "no tensor files in " + dir.string());
  return files;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::io_failure, "write failed: " + path.string());
}

Json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::invalid_argument, path.string() + ": " + e.what());
  }
}

Json stats_json(const CalibStats& s) {
  return Json{{"sigma", s.sigma},
              {"mu", s.mu},
              {"min_avg", s.min_avg},
              {"n_tensors", s.n_tensors},
              {"per_tensor_sigma", s.per_tensor_sigma}};
}

CalibStats stats_from_json(const Json& j) {
  try {
    CalibStats s;
    s.sigma = j.at("sigma").get<double>();
    s.mu = j.at("mu").get<double>();
    s.min_avg = j.at("min_avg").get<double>();
    s.n_tensors = j.at("n_tensors").get<std::size_t>();
    if (j.contains("per_tensor_sigma")) s.per_tensor_sigma = j["per_tensor_sigma"].get<std::vector<double>>();
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("stats file: ") + e.what());
  }
}

Json model_json(const LinearClipModel& m) {
  return Json{{"bits", m.bits},
              {"slope", m.slope},
              {"intercept", m.intercept},
              {"sigma_lo", m.sigma_lo},
              {"sigma_hi", m.sigma_hi},
              {"residual_max", nullable(m.residual_max)}};
}

LinearClipModel model_from_json(const Json& j) {
  try {
    LinearClipModel m;
    m.bits = j.at("bits").get<int>();
    m.slope = j.at("slope").get<double>();
    m.intercept = j.at("intercept").get<double>();
    m.sigma_lo = j.at("sigma_lo").get<double>();
    m.sigma_hi = j.at("sigma_hi").get<double>();
    m.residual_max = j.at("residual_max").is_null() ? std::nan("") : j["residual_max"].get<double>();
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("model file: ") + e.what());
  }
}

Json spec_json(const QuantSpec& spec) {
  return Json{{"bits", spec.bits()},
              {"clip", spec.clip()},
              {"delta", spec.delta()},
              {"mode", std::string(to_string(spec.mode()))},
              {"levels", std::vector<double>(spec.levels().begin(), spec.levels().end())}};
}

Json counters_json(const KernelCounters& c) {
  return Json{{"exp_calls", c.exp_calls}, {"accum_iters", c.accum_iters}, {"lut_lookups", c.lut_lookups}};
}

Json bench_json(const BenchReport& r) {
  return Json{{"kernel", r.kernel},           {"rows", r.rows},
              {"cols", r.cols},               {"ns_per_row", r.ns_per_row},
              {"speedup_vs_reference", r.speedup_vs_reference},
              {"exp_calls", r.exp_calls},     {"accum_iters", r.accum_iters},
              {"lut_lookups", r.lut_lookups}, {"repetitions", r.repetitions},
              {"warmup", r.warmup}};
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// Per-command runners -------------------------------------------------------

struct CalibrateArgs {
  std::string input_dir, out, hist;
  std::size_t bins = 20;
};

void cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  std::vector<TensorF32> tensors;
  for (const auto& f : list_tensor_files(a.input_dir)) tensors.push_back(load_tensor(f));
  const auto stats = calibrate(tensors);

  Json j = stats_json(stats);
  write_text(a.out, j.dump(2) + "\n");

  // Histogram of per-tensor sigma.
  const fs::path hist = a.hist.empty() ? fs::path(a.out).replace_extension(".sigma_hist.csv") : fs::path(a.hist);
  const auto [lo_it, hi_it] = std::minmax_element(stats.per_tensor_sigma.begin(), stats.per_tensor_sigma.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const std::size_t bins = hi > lo ? std::max<std::size_t>(a.bins, 1) : 1;
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;
  std::vector<std::size_t> counts(bins, 0);
  for (double s : stats.per_tensor_sigma) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((s - lo) / width) : 0;
    counts[std::min(b, bins - 1)]++;
  }
  std::ostringstream csv;
  csv << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < bins; ++b) {
    const double b_lo = lo + width * static_cast<double>(b);
    const double b_hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
    csv << fmt(b_lo) << ',' << fmt(b_hi) << ',' << counts[b] << '\n';
  }
  write_text(hist, csv.str());

  j["stats_path"] = a.out;
  j["histogram_path"] = hist.string();
  out << j.dump(2) << '\n';
}

struct SolveArgs {
  double mu = 0.0, sigma = 1.0;
  int bits = 2;
};

void cmd_solve(const SolveArgs& a, std::ostream& out) {
  const GaussianParams g{a.mu, a.sigma};
  const auto sol = solve_optimal_clip(g, a.bits);
  Json j{{"mu", a.mu},
         {"sigma", a.sigma},
         {"bits", a.bits},
         {"c_star", sol.c_star},
         {"mse_at_min", sol.mse_at_min},
         {"method", std::string(to_string(sol.method))},
         {"grid_lo", sol.grid_lo},
         {"grid_hi", sol.grid_hi},
         {"grid_points", sol.grid_points},
         {"left_neighbor_mse", sol.left_neighbor_mse},
         {"right_neighbor_mse", sol.right_neighbor_mse},
         {"slope_sign_changes", sol.slope_sign_changes}};
  const auto b = mse_total(g, sol.c_star, a.bits);
  j["mse_quant"] = b.mse_quant;
  j["mse_clip"] = b.mse_clip;
  out << j.dump(2) << '\n';
}

struct FitArgs {
  int bits = 2;
  double lo = 0.9, hi = 3.4;
  std::size_t points = 26;
  unsigned threads = 1;
  std::string out;
};

void cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto model = fit_linear_model(a.bits, a.lo, a.hi, a.points, a.threads);
  Json j = model_json(model);
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  j["points"] = a.points;
  const auto published = builtin_clip_model(a.bits);
  j["published_slope"] = published ? Json(published->slope) : Json(nullptr);
  j["published_intercept"] = published ? Json(published->intercept) : Json(nullptr);
  out << j.dump(2) << '\n';
}

struct BuildLutArgs {
  std::string stats, mode = "exaq", model, out;
  int bits = 2;
  int pack = 0;
};

void cmd_build_lut(const BuildLutArgs& a, std::ostream& out) {
  const auto stats = stats_from_json(read_json(a.stats));
  const auto mode = parse_quant_mode(a.mode);
  const int pack = a.pack > 0 ? a.pack : default_pack_width(a.bits);
  if (pack * a.bits > kMaxSumKeyBits) {
    throw Error(ErrorCode::invalid_argument, "P*M = " + std::to_string(pack * a.bits) + " exceeds 12");
  }

  Json model_info = nullptr;
  std::optional<QuantSpec> spec;
  if (mode == QuantMode::exaq) {
    LinearClipModel model;
    if (!a.model.empty()) {
      model = model_from_json(read_json(a.model));
    } else if (auto builtin = builtin_clip_model(a.bits)) {
      model = *builtin;
    } else {
      model = fit_linear_model(a.bits, 0.9, 3.4, 26);
    }
    spec = make_spec_exaq(stats, a.bits, model);
    model_info = model_json(model);
    model_info["sigma_in_range"] = predict_clip(model, stats.sigma).in_range;
  } else {
    spec = make_spec_naive(stats, a.bits);
  }

  const auto bundle = build_lut_bundle(*spec, pack);
  save_lut(bundle.spec, bundle.exp_lut, bundle.sum_lut, a.out);
  Json j{{"path", a.out},
         {"spec", spec_json(bundle.spec)},
         {"pack_width", pack},
         {"sigma", stats.sigma},
         {"exp_entries", bundle.exp_lut.entries.size()},
         {"sum_entries", bundle.sum_lut.entries.size()},
         {"model", model_info}};
  out << j.dump(2) << '\n';
}

struct SoftmaxArgs {
  std::string tensor, lut, kernel = "reference", out;
  unsigned threads = 1;
};

void cmd_softmax(const SoftmaxArgs& a, std::ostream& out) {
  const auto input = load_tensor(a.tensor);
  const auto kind = parse_kernel(a.kernel);
  std::optional<LutBundle> bundle;
  if (!a.lut.empty()) bundle = load_lut(a.lut);
  if (kind != KernelKind::reference && !bundle) {
    throw Error(ErrorCode::invalid_argument, "--lut is required for kernel " + a.kernel);
  }
  const auto res = softmax_batch(input, kind, bundle ? &*bundle : nullptr, a.threads);
  save_tensor(res.probs, a.out);

  double worst = 0.0;
  for (std::size_t r = 0; r < res.probs.rows(); ++r) {
    double s = 0.0;
    for (float p : res.probs.row(r)) s += p;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  Json j{{"kernel", std::string(to_string(kind))},
         {"rows", input.rows()},
         {"cols", input.cols()},
         {"output_path", a.out}};
  j.update(counters_json(res.counters));
  j["max_row_sum_deviation"] = worst;
  j["spec"] = bundle ? spec_json(bundle->spec) : Json(nullptr);
  out << j.dump(2) << '\n';
}

struct SimulateArgs {
  double mu = 0.0, sigma = 1.0, step = 0.01;
  int bits = 2;
  std::size_t samples = 100000;
  std::optional<std::uint64_t> seed;
  bool paper_parity = false;
  std::string out;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const std::size_t samples = a.paper_parity ? 1000 : a.samples;
  const std::uint64_t seed = a.seed ? *a.seed : default_seed();
  const GaussianParams g{a.mu, a.sigma};
  const auto sol = solve_optimal_clip(g, a.bits);
  const double lo = std::min(g.mu - 8.0 * g.sigma, -2.0 * a.step);
  const auto grid = uniform_clip_grid(lo, -a.step, a.step);
  const auto sim = simulate_empirical_clip(g, a.bits, samples, seed, grid);

  std::ostringstream csv;
  csv << "C,analytic_mse,empirical_mse\n";
  for (const auto& [c, emp] : sim.curve) {
    csv << fmt(c) << ',' << fmt(mse_total(g, c, a.bits).total) << ',' << fmt(emp) << '\n';
  }
  if (!a.out.empty()) write_text(a.out, csv.str());

  Json j{{"mu", a.mu},
         {"sigma", a.sigma},
         {"bits", a.bits},
         {"samples", samples},
         {"seed", seed},
         {"paper_parity", a.paper_parity},
         {"c_star_analytic", sol.c_star},
         {"c_empirical", sim.c_empirical},
         {"gap", std::abs(sol.c_star - sim.c_empirical)},
         {"grid_points", grid.size()},
         {"csv_path", a.out.empty() ? Json(nullptr) : Json(a.out)}};
  out << j.dump(2) << '\n';
}

void cmd_bench(const BenchConfig& cfg, std::ostream& out) {
  const auto cmp = run_bench(cfg);
  const double reduction = 100.0 * (1.0 - cmp.exaq.ns_per_row / cmp.reference.ns_per_row);
  Json j{{"reference", bench_json(cmp.reference)},
         {"exaq", bench_json(cmp.exaq)},
         {"spec", spec_json(cmp.spec)},
         {"speedup_vs_reference", cmp.exaq.speedup_vs_reference},
         {"accum_iter_ratio", static_cast<double>(cmp.reference.accum_iters) /
                                  static_cast<double>(cmp.exaq.accum_iters)},
         {"measured_runtime_reduction_percent", reduction},
         {"published_runtime_reduction_percent", kPublishedRuntimeReductionPercent}};
  out << j.dump(2) << '\n';
}

struct MseReportArgs {
  std::string tensor_dir, lut_exaq, lut_naive, out;
};

struct RowErrors {
  double exp_mse = 0.0;
  double out_mse = 0.0;
};

// Exp-domain error of the LUT values against exact e^x, plus output error
// against the reference kernel, both averaged over every element.
RowErrors tensor_errors(const TensorF32& t, const LutBundle& b) {
  RowErrors acc;
  std::vector<double> ref(t.cols());
  std::vector<double> got(t.cols());
  SoftmaxWorkspace ws;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    softmax_reference_into(row, ref);
    softmax_exaq_into(row, b.spec, b.exp_lut, b.sum_lut, got, ws);
    const auto shifted = shift_by_max(row);
    for (std::size_t i = 0; i < shifted.size(); ++i) {
      const double d = static_cast<double>(b.exp_lut.entries[ws.codes[i]]) - std::exp(shifted[i]);
      acc.exp_mse += d * d;
    }
    acc.out_mse += output_mse(ref, got) * static_cast<double>(t.cols());
  }
  const double n = static_cast<double>(t.size());
  acc.exp_mse /= n;
  acc.out_mse /= n;
  return acc;
}

void cmd_mse_report(const MseReportArgs& a, std::ostream& out) {
  const auto exaq_bundle = load_lut(a.lut_exaq);
  const auto naive_bundle = load_lut(a.lut_naive);
  check_lut_matches(exaq_bundle.spec, exaq_bundle.exp_lut, exaq_bundle.sum_lut);
  check_lut_matches(naive_bundle.spec, naive_bundle.exp_lut, naive_bundle.sum_lut);

  std::ostringstream csv;
  csv << "file,rows,cols,exp_mse_exaq,exp_mse_naive,out_mse_exaq,out_mse_naive\n";
  RowErrors sum_exaq, sum_naive;
  std::size_t count = 0, exaq_wins_exp = 0, exaq_wins_out = 0;
  for (const auto& f : list_tensor_files(a.tensor_dir)) {
    const auto t = load_tensor(f);
    const auto e = tensor_errors(t, exaq_bundle);
    const auto n = tensor_errors(t, naive_bundle);
    csv << f.filename().string() << ',' << t.rows() << ',' << t.cols() << ',' << fmt(e.exp_mse) << ','
        << fmt(n.exp_mse) << ',' << fmt(e.out_mse) << ',' << fmt(n.out_mse) << '\n';
    sum_exaq.exp_mse += e.exp_mse;
    sum_exaq.out_mse += e.out_mse;
    sum_naive.exp_mse += n.exp_mse;
    sum_naive.out_mse += n.out_mse;
    exaq_wins_exp += e.exp_mse <= n.exp_mse;
    exaq_wins_out += e.out_mse <= n.out_mse;
    ++count;
  }
  write_text(a.out, csv.str());
  const double c = static_cast<double>(count);
  Json j{{"tensors", count},
         {"mean_exp_mse_exaq", sum_exaq.exp_mse / c},
         {"mean_exp_mse_naive", sum_naive.exp_mse / c},
         {"mean_out_mse_exaq", sum_exaq.out_mse / c},
         {"mean_out_mse_naive", sum_naive.out_mse / c},
         {"exaq_le_naive_exp", exaq_wins_exp},
         {"exaq_le_naive_out", exaq_wins_out},
         {"csv_path", a.out}};
  out << j.dump(2) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exponent-aware softmax quantization toolkit", "exaq"};
  app.require_subcommand(1);
  std::function<void()> action;

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Collect sigma/min statistics from a tensor directory");
  c->add_option("--input-dir", cal.input_dir, "Directory of EXAQTNSR files")->required();
  c->add_option("--out", cal.out, "Stats JSON path")->required();
  c->add_option("--hist", cal.hist, "Per-tensor sigma histogram CSV path");
  c->add_option("--bins", cal.bins, "Histogram bins")->check(CLI::PositiveNumber);
  c->callback([&] { action = [&] { cmd_calibrate(cal, out); }; });

  SolveArgs sol;
  auto* s = app.add_subcommand("solve", "Find the MSE-optimal clip for N(mu, sigma^2)");
  s->add_option("--mu", sol.mu, "Mean of the shifted input");
  s->add_option("--sigma", sol.sigma, "Standard deviation")->required();
  s->add_option("--bits", sol.bits, "Bit width")->required()->check(CLI::Range(2, 4));
  s->callback([&] { action = [&] { cmd_solve(sol, out); }; });

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit the linear sigma -> C* model");
  f->add_option("--bits", fit.bits, "Bit width")->required()->check(CLI::Range(2, 4));
  f->add_option("--lo", fit.lo, "Lowest sigma");
  f->add_option("--hi", fit.hi, "Highest sigma");
  f->add_option("--points", fit.points, "Number of sigma points")->check(CLI::Range(std::size_t{8}, std::size_t{100000}));
  f->add_option("--threads", fit.threads, "Worker threads")->check(CLI::PositiveNumber);
  f->add_option("--out", fit.out, "Also write the model JSON here");
  f->callback([&] { action = [&] { cmd_fit(fit, out); }; });

  BuildLutArgs bl;
  auto* b = app.add_subcommand("build-lut", "Build LUT_exp and LUT_sum into a bundle file");
  b->add_option("--stats", bl.stats, "Stats JSON from calibrate")->required();
  b->add_option("--bits", bl.bits, "Bit width")->required()->check(CLI::Range(2, 4));
  b->add_option("--mode", bl.mode, "exaq or naive")->check(CLI::IsMember({"exaq", "naive"}));
  b->add_option("--pack", bl.pack, "Codes per sum-table key (0 = default)")->check(CLI::NonNegativeNumber);
  b->add_option("--model", bl.model, "Model JSON from fit (exaq mode)");
  b->add_option("--out", bl.out, "Bundle output path")->required();
  b->callback([&] { action = [&] { cmd_build_lut(bl, out); }; });

  SoftmaxArgs sm;
  auto* m = app.add_subcommand("softmax", "Run a softmax kernel over every row of a tensor");
  m->add_option("--tensor", sm.tensor, "Input tensor")->required();
  m->add_option("--lut", sm.lut, "LUT bundle (not needed for reference)");
  m->add_option("--kernel", sm.kernel, "reference | exaq | naive | scalar-oracle")
      ->check(CLI::IsMember({"reference", "exaq", "naive", "scalar-oracle"}));
  m->add_option("--out", sm.out, "Output tensor path")->required();
  m->add_option("--threads", sm.threads, "Worker threads")->check(CLI::PositiveNumber);
  m->callback([&] { action = [&] { cmd_softmax(sm, out); }; });

  SimulateArgs sim;
  std::uint64_t seed_value = 0;
  auto* si = app.add_subcommand("simulate", "Analytic vs Monte Carlo MSE curve over clip values");
  si->add_option("--mu", sim.mu, "Mean");
  si->add_option("--sigma", sim.sigma, "Standard deviation")->required();
  si->add_option("--bits", sim.bits, "Bit width")->required()->check(CLI::Range(2, 4));
  si->add_option("--samples", sim.samples, "Monte Carlo samples")->check(CLI::Range(std::size_t{100}, std::size_t{100000000}));
  auto* seed_opt = si->add_option("--seed", seed_value, "Sampler seed (default: EXAQ_SEED or 1)");
  si->add_option("--step", sim.step, "Clip grid step")->check(CLI::PositiveNumber);
  si->add_flag("--paper-parity", sim.paper_parity, "Use 1000 samples");
  si->add_option("--out", sim.out, "CSV output path");
  si->callback([&] {
    if (seed_opt->count() > 0) sim.seed = seed_value;
    action = [&] { cmd_simulate(sim, out); };
  });

  BenchConfig bc;
  std::uint64_t bench_seed = 0;
  auto* be = app.add_subcommand("bench", "Time reference vs EXAQ kernels");
  be->add_option("--rows", bc.rows, "Rows")->check(CLI::PositiveNumber);
  be->add_option("--cols", bc.cols, "Columns")->check(CLI::PositiveNumber);
  be->add_option("--bits", bc.bits, "Bit width")->check(CLI::Range(2, 4));
  be->add_option("--pack", bc.pack_width, "Pack width (0 = default)")->check(CLI::NonNegativeNumber);
  be->add_option("--reps", bc.reps, "Timed repetitions")->check(CLI::Range(std::size_t{3}, std::size_t{100000}));
  be->add_option("--warmup", bc.warmup, "Untimed warmup passes");
  be->add_option("--sigma", bc.sigma, "Input standard deviation")->check(CLI::PositiveNumber);
  auto* bench_seed_opt = be->add_option("--seed", bench_seed, "Input seed (default: EXAQ_SEED or 1)");
  be->callback([&] {
    action = [&] {
      bc.seed = bench_seed_opt->count() > 0 ? bench_seed : default_seed();
      cmd_bench(bc, out);
    };
  });

  MseReportArgs mr;
  auto* r = app.add_subcommand("mse-report", "Compare EXAQ and NAIVE errors over a tensor directory");
  r->add_option("--tensor-dir", mr.tensor_dir, "Directory of tensors")->required();
  r->add_option("--lut-exaq", mr.lut_exaq, "EXAQ bundle")->required();
  r->add_option("--lut-naive", mr.lut_naive, "NAIVE bundle")->required();
  r->add_option("--out", mr.out, "CSV output path")->required();
  r->callback([&] { action = [&] { cmd_mse_report(mr, out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    action();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::invalid_argument ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace exaq::cli
