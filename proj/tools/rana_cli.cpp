// rana: compress linear layers and MLP blocks with rank-adaptive adapters,
// then evaluate errors, sparsity histograms and masked-GEMV latency.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "rana/allocation.hpp"
#include "rana/evaluation.hpp"
#include "rana/io.hpp"
#include "rana/kernels.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rana;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitShape = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitMissingBundle = 5;

int thread_cap() {
  if (const char* env = std::getenv("RANA_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

struct BundleLayer {
  std::string name;
  std::string kind;  // "linear" | "mlp"
  fs::path weights;  // linear
  fs::path up, gate, down;  // mlp; gate empty for non-gated
  fs::path calib;
  Activation activation = Activation::SiLU;
};

struct Bundle {
  fs::path root;
  std::vector<BundleLayer> layers;
};

Activation parse_activation(const std::string& s) {
  if (s == "silu") return Activation::SiLU;
  if (s == "gelu") return Activation::GeLU;
  if (s == "relu") return Activation::ReLU;
  throw ParseError("unknown activation '" + s + "'", 0, "manifest.json");
}

Bundle load_bundle(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest))
    throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                            "bundle manifest " + manifest.string());
  std::ifstream is(manifest);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), static_cast<std::uint64_t>(e.byte), manifest.string());
  }
  Bundle b;
  b.root = dir;
  for (const auto& l : j.at("layers")) {
    BundleLayer layer;
    layer.name = l.at("name").get<std::string>();
    layer.kind = l.at("kind").get<std::string>();
    layer.calib = dir / l.at("calib").get<std::string>();
    if (layer.kind == "linear") {
      layer.weights = dir / l.at("weights").get<std::string>();
    } else if (layer.kind == "mlp") {
      layer.up = dir / l.at("up").get<std::string>();
      if (l.contains("gate")) layer.gate = dir / l.at("gate").get<std::string>();
      layer.down = dir / l.at("down").get<std::string>();
      if (l.contains("activation"))
        layer.activation = parse_activation(l.at("activation").get<std::string>());
    } else {
      throw ParseError("unknown layer kind '" + layer.kind + "'", 0,
                       manifest.string());
    }
    b.layers.push_back(std::move(layer));
  }
  return b;
}

MlpWeights load_mlp_weights(const BundleLayer& l) {
  MlpWeights w{read_matrix(l.up), std::nullopt, read_matrix(l.down),
               l.activation};
  if (!l.gate.empty()) w.gate = read_matrix(l.gate);
  return w;
}

json flops_json(const FlopCount& f) {
  json b = json::object();
  for (const auto& [k, v] : f.breakdown) b[k] = v;
  return json{{"total", f.total}, {"breakdown", b}};
}

json layer_alloc_json(const LayerAllocation& a) {
  return json{{"kept_ranks", a.kept_ranks},
              {"expected_active", a.target_expected_active},
              {"threshold", a.threshold},
              {"flops", flops_json(a.achieved_flops)},
              {"calib_error", a.calib_error}};
}

json layer_log_json(const std::vector<LayerCandidate>& log) {
  json out = json::array();
  for (const auto& c : log)
    out.push_back(json{{"kept_ranks", c.kept_ranks},
                       {"expected_active", c.expected_active},
                       {"flops", c.flops},
                       {"error", c.error},
                       {"saturated", c.saturated}});
  return out;
}

json mlp_log_json(const std::vector<MlpCandidate>& log) {
  json out = json::array();
  for (const auto& c : log)
    out.push_back(json{{"f_up", c.f_up},
                       {"f_gate", c.f_gate},
                       {"f_down", c.f_down},
                       {"flops", c.flops},
                       {"error", c.error},
                       {"feasible", c.feasible}});
  return out;
}

// ---------------------------------------------------------------------------
// decompose

int cmd_decompose(const fs::path& weights_path, const fs::path& calib_path,
                  std::size_t keep_ranks, const fs::path& outdir) {
  DenseMatrix W = read_matrix(weights_path);
  CalibrationSet calib{read_matrix(calib_path)};
  RankDecomposition dec = decompose(W, calib, keep_ranks);
  fs::create_directories(outdir);
  write_matrix(outdir / "A.rana", dec.A);
  write_matrix(outdir / "B.rana", dec.B);
  write_vector(outdir / "S.rana", dec.singular_values);
  json manifest{{"schema_version", 1},
                {"toolkit_version", "1.0.0"},
                {"out_dim", dec.out_dim},
                {"in_dim", dec.in_dim},
                {"ranks", dec.ranks()},
                {"calib_samples", calib.samples()},
                {"discarded_energy", dec.discarded_energy}};
  if (dec.ranks() < std::min(W.rows(), W.cols()) &&
      (keep_ranks == 0 || dec.ranks() < keep_ranks))
    manifest["warning"] = "trailing singular values below 1e-12*sigma_max dropped";
  write_text_atomic(outdir / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const fs::path& cov_path, std::size_t dim, std::size_t samples,
              std::uint64_t seed, const fs::path& out) {
  Rng rng(seed);
  DenseMatrix X(1, 1);
  if (!cov_path.empty()) {
    DenseMatrix cov = read_matrix(cov_path);
    if (cov.rows() != cov.cols())
      throw ShapeError("synth: covariance must be square");
    // Cholesky-like factor via SVD (works for PSD input)
    SvdResult svd = thin_svd(cov);
    DenseMatrix L(cov.rows(), cov.cols());
    for (std::size_t r = 0; r < cov.rows(); ++r)
      for (std::size_t c = 0; c < cov.cols(); ++c)
        L(r, c) = svd.U(r, c) * std::sqrt(svd.S[c]);
    X = matmul(L, random_matrix(cov.rows(), samples, rng));
  } else {
    X = random_matrix(dim, samples, rng);
  }
  write_matrix(out, X);
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate

int cmd_calibrate(const std::string& kind, const fs::path& b_path,
                  const fs::path& weights_path, const fs::path& calib_path,
                  double target_active, const fs::path& out) {
  json result{{"schema_version", 1}, {"kind", kind}};
  DenseMatrix calib = read_matrix(calib_path);
  if (kind == "b") {
    DenseMatrix B = read_matrix(b_path);
    RankDecomposition dec{DenseMatrix::identity(B.rows()), B,
                          DenseVector(B.rows(), 0.0), B.rows(), B.cols(), 0.0};
    ContributionStats stats =
        rank_contributions(dec, CalibrationSet{std::move(calib)});
    BMasker m = calibrate_b_masker(stats, target_active);
    result["threshold"] = m.threshold;
    result["target_expected_active"] = m.target_expected_active;
    result["calibrated_mean_active"] = m.calibrated_mean_active;
    result["ranks"] = m.ranks;
  } else if (kind == "neuron") {
    DenseMatrix W_down = read_matrix(weights_path);
    NeuronThresholdMasker m =
        calibrate_neuron_masker(W_down, calib, target_active);
    result["threshold"] = m.threshold;
    result["target_expected_active"] = m.target_expected_active;
    result["calibrated_mean_active"] = m.calibrated_mean_active;
  } else {
    throw NumericError("calibrate: kind must be b|neuron");
  }
  write_text_atomic(out, result.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// compress

int cmd_compress(const fs::path& bundle_dir, double budget, double grid_step,
                 const std::string& masker, std::uint64_t seed,
                 const fs::path& outdir) {
  Bundle bundle = load_bundle(bundle_dir);
  fs::create_directories(outdir);

  json config{{"seed", seed},
              {"budget", budget},
              {"grid_step", grid_step},
              {"masker", masker},
              {"bundle", bundle_dir.string()}};
  json plan{{"schema_version", 1},
            {"config", config},
            {"config_hash", config_hash(config.dump())},
            {"layers", json::array()}};

  std::vector<std::string> infeasible_msgs;
  for (const auto& layer : bundle.layers) {
    CalibrationSet calib{read_matrix(layer.calib)};
    json entry{{"name", layer.name}, {"kind", layer.kind}};
    try {
      if (layer.kind == "linear") {
        DenseMatrix W = read_matrix(layer.weights);
        RankDecomposition dec = decompose(W, calib);
        ContributionStats stats = rank_contributions(dec, calib);
        const double abs_budget =
            budget * dense_linear_flops(W.rows(), W.cols()).total;
        LayerAllocation alloc =
            line_search_layer(W, dec, stats, calib, abs_budget);
        RankAdaptedLinear adapted = build_rank_adapted(dec, stats, alloc);
        write_matrix(outdir / (layer.name + ".A.rana"), adapted.dec.A);
        write_matrix(outdir / (layer.name + ".B.rana"), adapted.dec.B);
        entry["allocation"] = layer_alloc_json(alloc);
        entry["allocation"]["compression"] = compression_rate(
            alloc.achieved_flops, dense_linear_flops(W.rows(), W.cols()));
        entry["search_log"] = layer_log_json(alloc.log);
        if (masker == "sigmoid") {
          SigmoidTrainOptions opt;
          opt.seed = seed;
          opt.inner_dim = std::max<std::size_t>(2, adapted.dec.ranks() / 4);
          SigmoidTrainResult res = train_sigmoid_masker(
              *adapted.b_masker, adapted.dec, calib, opt);
          write_matrix(outdir / (layer.name + ".maskerC.rana"), res.masker.C);
          write_matrix(outdir / (layer.name + ".maskerD.rana"), res.masker.D);
          entry["sigmoid_masker"] = json{{"inner_dim", opt.inner_dim},
                                         {"initial_bce", res.initial_loss},
                                         {"final_bce", res.final_loss}};
        }
      } else {
        MlpWeights w = load_mlp_weights(layer);
        MlpDecompositions pre = prepare_mlp(w, calib);
        const double abs_budget = budget * dense_mlp_flops(w.shape()).total;
        MlpAllocation alloc =
            grid_search_mlp(w, pre, calib, abs_budget, grid_step);
        RanaMlp mlp = build_rana_mlp(w, pre, alloc);
        write_matrix(outdir / (layer.name + ".up.A.rana"), mlp.up.dec.A);
        write_matrix(outdir / (layer.name + ".up.B.rana"), mlp.up.dec.B);
        if (mlp.gate) {
          write_matrix(outdir / (layer.name + ".gate.A.rana"), mlp.gate->dec.A);
          write_matrix(outdir / (layer.name + ".gate.B.rana"), mlp.gate->dec.B);
        }
        json alloc_json{
            {"f_up", alloc.f_up},
            {"f_gate", alloc.f_gate},
            {"f_down", alloc.f_down},
            {"up", layer_alloc_json(alloc.up)},
            {"down",
             json{{"expected_active", alloc.down.target_expected_active},
                  {"threshold", alloc.down.threshold},
                  {"flops", flops_json(alloc.down.achieved_flops)}}},
            {"achieved_flops", flops_json(alloc.achieved_flops)},
            {"compression", compression_rate(alloc.achieved_flops,
                                             dense_mlp_flops(w.shape()))},
            {"calib_error", alloc.calib_error}};
        if (alloc.gate) alloc_json["gate"] = layer_alloc_json(*alloc.gate);
        entry["allocation"] = alloc_json;
        entry["search_log"] = mlp_log_json(alloc.log);
      }
    } catch (const InfeasibleBudget& e) {
      infeasible_msgs.push_back(layer.name + ": minimum feasible FLOPs " +
                                std::to_string(e.minimum_feasible));
      continue;
    }
    plan["layers"].push_back(std::move(entry));
  }
  if (!infeasible_msgs.empty()) {
    for (const auto& m : infeasible_msgs)
      std::cerr << "infeasible budget for " << m << "\n";
    return kExitInfeasible;
  }
  write_text_atomic(outdir / "plan.json", plan.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const fs::path& bundle_dir, const fs::path& adapted_dir,
             std::uint64_t seed, bool compare, bool json_out,
             const fs::path& outdir) {
  Bundle bundle = load_bundle(bundle_dir);
  const fs::path plan_path = adapted_dir / "plan.json";
  if (!fs::exists(plan_path))
    throw std::system_error(
        std::make_error_code(std::errc::no_such_file_or_directory),
        "adapted bundle " + plan_path.string());
  std::ifstream is(plan_path);
  json plan = json::parse(is);
  fs::create_directories(outdir);

  std::vector<ErrorReport> rows;
  json summary{{"schema_version", 1},
               {"config_hash", plan.at("config_hash")},
               {"layers", json::array()}};

  for (const auto& layer : bundle.layers) {
    const json* entry = nullptr;
    for (const auto& e : plan.at("layers"))
      if (e.at("name") == layer.name) entry = &e;
    if (!entry) continue;
    CalibrationSet full{read_matrix(layer.calib)};
    auto [calib_x, eval_x] = split_calibration(full.X, seed);
    CalibrationSet calib{std::move(calib_x)};

    if (layer.kind == "linear") {
      DenseMatrix W = read_matrix(layer.weights);
      const auto& a = entry->at("allocation");
      RankDecomposition dec{
          read_matrix(adapted_dir / (layer.name + ".A.rana")),
          read_matrix(adapted_dir / (layer.name + ".B.rana")),
          DenseVector(a.at("kept_ranks").get<std::size_t>(), 0.0), W.rows(),
          W.cols(), 0.0};
      BMasker masker{a.at("threshold").get<double>(),
                     a.at("expected_active").get<double>(), 0.0, dec.ranks()};
      RankAdaptedLinear adapted{std::move(dec), masker, std::nullopt};
      ErrorReport rep = measure_layer_error(
          [&](const DenseVector& x) { return matvec(W, x); },
          [&](const DenseVector& x) { return forward_rank_adapted(adapted, x); },
          eval_x, layer.name + "/rana");
      rep.flop_compression = a.at("compression").get<double>();
      rows.push_back(rep);
    } else {
      MlpWeights w = load_mlp_weights(layer);
      const auto& a = entry->at("allocation");
      auto load_layer = [&](const std::string& comp,
                            const json& la) -> RankAdaptedLinear {
        RankDecomposition dec{
            read_matrix(adapted_dir / (layer.name + "." + comp + ".A.rana")),
            read_matrix(adapted_dir / (layer.name + "." + comp + ".B.rana")),
            DenseVector(la.at("kept_ranks").get<std::size_t>(), 0.0),
            w.up.rows(), w.up.cols(), 0.0};
        BMasker m{la.at("threshold").get<double>(),
                  la.at("expected_active").get<double>(), 0.0, dec.ranks()};
        return RankAdaptedLinear{std::move(dec), m, std::nullopt};
      };
      RanaMlp mlp{load_layer("up", a.at("up")), std::nullopt, w.down,
                  std::nullopt, w.activation};
      if (w.gate) mlp.gate = load_layer("gate", a.at("gate"));
      const auto& dj = a.at("down");
      const double d_active = dj.at("expected_active").get<double>();
      if (d_active < static_cast<double>(w.up.rows())) {
        DenseVector norms(w.up.rows(), 0.0);
        for (std::size_t i = 0; i < w.down.cols(); ++i) {
          double s = 0.0;
          for (std::size_t r = 0; r < w.down.rows(); ++r)
            s += w.down(r, i) * w.down(r, i);
          norms[i] = std::sqrt(s);
        }
        mlp.down_masker = NeuronThresholdMasker{
            dj.at("threshold").get<double>(), std::move(norms), d_active, 0.0};
      }
      ErrorReport rep = measure_layer_error(
          [&](const DenseVector& x) { return forward_dense_mlp(w, x); },
          [&](const DenseVector& x) { return forward_rana_mlp(mlp, x); },
          eval_x, layer.name + "/rana");
      rep.flop_compression = a.at("compression").get<double>();
      rows.push_back(rep);

      if (compare) {
        const double budget = plan.at("config").at("budget").get<double>();
        auto table = compare_adapters(
            w, budget,
            {BaselineKind::CatsLike, BaselineKind::NeuronAdapter,
             BaselineKind::FixedSvd},
            calib, eval_x, seed);
        for (auto& r : table) {
          r.adapter = layer.name + "/" + r.adapter;
          rows.push_back(r);
        }
      }
    }
  }

  for (const auto& r : rows)
    summary["layers"].push_back(json{{"adapter", r.adapter},
                                     {"mean_error", r.mean_normalized_error},
                                     {"median_error", r.median_normalized_error},
                                     {"max_error", r.max_normalized_error},
                                     {"skipped", r.skipped_zero_outputs},
                                     {"flop_compression", r.flop_compression},
                                     {"infeasible", r.infeasible}});
  write_text_atomic(outdir / "errors.csv", error_table_csv(rows));
  write_text_atomic(outdir / "errors.json", summary.dump(2) + "\n");
  if (json_out)
    std::cout << summary.dump() << "\n";
  else
    std::cerr << error_table_csv(rows);
  return 0;
}

// ---------------------------------------------------------------------------
// hist

int cmd_hist(const fs::path& weights_path, const fs::path& calib_path,
             std::size_t bins, const fs::path& out) {
  DenseMatrix W = read_matrix(weights_path);
  CalibrationSet calib{read_matrix(calib_path)};
  RankDecomposition dec = decompose(W, calib);
  ContributionStats stats = rank_contributions(dec, calib);
  SparsityHistogram h = build_sparsity_histogram(stats, bins);
  write_text_atomic(out, histogram_csv(h));
  std::cerr << "top-half mass: " << h.top_half_mass << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(std::vector<std::size_t> sizes, std::vector<double> densities,
              std::size_t reps, std::uint64_t seed, const fs::path& out) {
  bool has_dense = false;
  for (double d : densities) has_dense |= d == 1.0;
  if (!has_dense) densities.insert(densities.begin(), 1.0);
  auto rows = bench_masked_gemv(sizes, densities, reps, seed);
  write_text_atomic(out, bench_csv(rows));
  std::cerr << bench_csv(rows);
  return 0;
}

// ---------------------------------------------------------------------------
// prop1-check

int cmd_prop1_check(std::uint64_t seed, std::size_t trials, bool json_out) {
  Rng rng(seed);
  double max_dev = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t d = 2 + rng.index(8), h = 2 + rng.index(12);
    DenseMatrix W_up = random_matrix(h, d, rng);
    DenseMatrix W_down = random_matrix(d, h, rng);
    Mask mask(h);
    for (auto& m : mask) m = rng.uniform() < 0.5 ? 1 : 0;
    DenseVector x = random_vector(d, rng);
    Prop1Construction c = build_prop1_equivalent(W_up, W_down);
    DenseVector a = forward_prop1(c, mask, x);
    DenseVector b = neuron_adapted_relu_forward(W_up, W_down, mask, x);
    for (std::size_t i = 0; i < a.size(); ++i)
      max_dev = std::max(max_dev, std::abs(a[i] - b[i]));
  }
  if (json_out)
    std::cout << json{{"trials", trials}, {"max_abs_deviation", max_dev}}.dump()
              << "\n";
  else
    std::cerr << "max abs deviation over " << trials << " trials: " << max_dev
              << "\n";
  return max_dev < 1e-12 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-adaptive layer compression toolkit"};
  app.require_subcommand(1);
  (void)thread_cap();

  // decompose
  auto* dec_cmd = app.add_subcommand("decompose", "factor W against calibration inputs");
  std::string dec_weights, dec_calib, dec_out = "decomposition";
  std::size_t dec_ranks = 0;
  dec_cmd->add_option("weights", dec_weights)->required();
  dec_cmd->add_option("calib", dec_calib)->required();
  dec_cmd->add_option("--keep-ranks", dec_ranks, "0 = full numerical rank");
  dec_cmd->add_option("--out", dec_out);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "synthesize calibration inputs");
  std::string synth_cov, synth_out = "calib.rana";
  std::size_t synth_dim = 0, synth_samples = kDefaultCalibrationSamples;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--cov", synth_cov, "covariance .rana (square)");
  synth_cmd->add_option("--dim", synth_dim, "isotropic dimension when no --cov");
  synth_cmd->add_option("--samples", synth_samples);
  synth_cmd->add_option("--seed", synth_seed);
  synth_cmd->add_option("--out", synth_out);

  // calibrate
  auto* cal_cmd = app.add_subcommand("calibrate", "fit a masker threshold");
  std::string cal_kind = "b", cal_b, cal_weights, cal_calib, cal_out = "masker.json";
  double cal_target = 0.0;
  cal_cmd->add_option("--kind", cal_kind, "b|neuron");
  cal_cmd->add_option("--b", cal_b, "B matrix .rana (kind=b)");
  cal_cmd->add_option("--weights", cal_weights, "down weights .rana (kind=neuron)");
  cal_cmd->add_option("--calib", cal_calib)->required();
  cal_cmd->add_option("--target-active", cal_target)->required();
  cal_cmd->add_option("--out", cal_out);

  // compress
  auto* comp_cmd = app.add_subcommand("compress", "allocate and build adapters");
  std::string comp_bundle, comp_out = "adapted", comp_masker = "b";
  double comp_budget = 0.5, comp_grid = 0.1;
  std::uint64_t comp_seed = 0;
  comp_cmd->add_option("bundle", comp_bundle)->required();
  comp_cmd->add_option("--budget", comp_budget, "fraction of dense FLOPs");
  comp_cmd->add_option("--grid-step", comp_grid);
  comp_cmd->add_option("--masker", comp_masker, "b|sigmoid");
  comp_cmd->add_option("--seed", comp_seed);
  comp_cmd->add_option("--out", comp_out);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "held-out error tables");
  std::string eval_bundle, eval_adapted, eval_out = "eval";
  std::uint64_t eval_seed = 0;
  bool eval_compare = false, eval_json = false;
  eval_cmd->add_option("bundle", eval_bundle)->required();
  eval_cmd->add_option("adapted", eval_adapted)->required();
  eval_cmd->add_option("--seed", eval_seed);
  eval_cmd->add_flag("--compare", eval_compare, "add baseline adapter rows");
  eval_cmd->add_flag("--json", eval_json);
  eval_cmd->add_option("--out", eval_out);

  // hist
  auto* hist_cmd = app.add_subcommand("hist", "rank-contribution histogram");
  std::string hist_weights, hist_calib, hist_out = "hist.csv";
  std::size_t hist_bins = 128;
  hist_cmd->add_option("weights", hist_weights)->required();
  hist_cmd->add_option("calib", hist_calib)->required();
  hist_cmd->add_option("--bins", hist_bins);
  hist_cmd->add_option("--out", hist_out);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "masked GEMV latency");
  std::vector<std::size_t> bench_sizes{1024};
  std::vector<double> bench_densities{1.0, 0.5, 0.25, 0.1};
  std::size_t bench_reps = 50;
  std::uint64_t bench_seed = 0;
  std::string bench_out = "bench.csv";
  bench_cmd->add_option("--sizes", bench_sizes);
  bench_cmd->add_option("--densities", bench_densities);
  bench_cmd->add_option("--reps", bench_reps);
  bench_cmd->add_option("--seed", bench_seed);
  bench_cmd->add_option("--out", bench_out);

  // prop1-check
  auto* prop1_cmd = app.add_subcommand("prop1-check",
                                       "rank-adapted vs neuron-adapted equality");
  std::uint64_t prop1_seed = 0;
  std::size_t prop1_trials = 200;
  bool prop1_json = false;
  prop1_cmd->add_option("--seed", prop1_seed);
  prop1_cmd->add_option("--trials", prop1_trials);
  prop1_cmd->add_flag("--json", prop1_json);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*dec_cmd)
      return cmd_decompose(dec_weights, dec_calib, dec_ranks, dec_out);
    if (*synth_cmd)
      return cmd_synth(synth_cov, synth_dim, synth_samples, synth_seed, synth_out);
    if (*cal_cmd)
      return cmd_calibrate(cal_kind, cal_b, cal_weights, cal_calib, cal_target,
                           cal_out);
    if (*comp_cmd)
      return cmd_compress(comp_bundle, comp_budget, comp_grid, comp_masker,
                          comp_seed, comp_out);
    if (*eval_cmd)
      return cmd_eval(eval_bundle, eval_adapted, eval_seed, eval_compare,
                      eval_json, eval_out);
    if (*hist_cmd) return cmd_hist(hist_weights, hist_calib, hist_bins, hist_out);
    if (*bench_cmd)
      return cmd_bench(bench_sizes, bench_densities, bench_reps, bench_seed,
                       bench_out);
    if (*prop1_cmd) return cmd_prop1_check(prop1_seed, prop1_trials, prop1_json);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitShape;
  } catch (const InfeasibleBudget& e) {
    std::cerr << "infeasible budget: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::system_error& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return kExitMissingBundle;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
