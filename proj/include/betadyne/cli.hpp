#pragma once

// Command implementations behind the betadyne executable: parameter sweeps,
// overlap maps over the displacement plane, EP searches, trajectory
// ensembles, the invariance suite, and scenario dumps. Every run writes its
// data files plus a manifest into the output directory; with a fixed config
// and seed the data files are byte-identical across reruns and thread counts.

#include "betadyne/core.hpp"
#include "betadyne/dynamics.hpp"
#include "betadyne/model.hpp"
#include "betadyne/parallel.hpp"
#include "betadyne/random_models.hpp"
#include "betadyne/scenarios.hpp"
#include "betadyne/serialize.hpp"
#include "betadyne/spectral.hpp"
#include "betadyne/version.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace betadyne::cli {

namespace fs = std::filesystem;

// --- config plumbing ----------------------------------------------------

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string config_hash(const json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

// Applies one `--set a.b.c=value` override; the value is parsed as JSON when
// possible, otherwise taken as a string.
inline void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
  std::string path = "/" + assignment.substr(0, eq);
  for (auto& c : path)
    if (c == '.') c = '/';
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  config[json::json_pointer(path)] = value;
}

inline double get_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

// --- scenario registry ----------------------------------------------------

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"gain-loss-qubit", "three-level", "kerr",
                                              "driven-qubit"};
  return names;
}

inline json default_params(const std::string& scenario) {
  if (scenario == "gain-loss-qubit")
    return json{{"omega", 1.0}, {"gamma_minus", 1.0}, {"gamma_plus", 0.5}};
  if (scenario == "three-level")
    return json{{"omega", 1.0}, {"delta_omega", 0.0}, {"drive", 0.05},
                {"gamma_eg", 0.001}, {"gamma_fe", 5.0}};
  if (scenario == "kerr")
    return json{{"detuning", 0.0}, {"kerr", 2.0}, {"drive", json{{"re", 0.0}, {"im", 0.0}}},
                {"gamma", 1.0}, {"truncation", 3}};
  if (scenario == "driven-qubit") return json{{"omega", 1.0}, {"gamma_minus", 1.0}};
  throw std::invalid_argument("unknown scenario '" + scenario + "'");
}

inline json merged_params(const std::string& scenario, const json& config) {
  json params = default_params(scenario);
  if (config.contains("params")) {
    for (const auto& [key, value] : config.at("params").items()) {
      if (!params.contains(key))
        throw std::invalid_argument("scenario '" + scenario + "' has no parameter '" + key + "'");
      params[key] = value;
    }
  }
  return params;
}

inline LindbladModel build_scenario(const std::string& scenario, const json& params) {
  if (scenario == "gain-loss-qubit")
    return build_gain_loss_qubit({params.at("omega").get<double>(),
                                  params.at("gamma_minus").get<double>(),
                                  params.at("gamma_plus").get<double>()});
  if (scenario == "three-level")
    return build_three_level({params.at("omega").get<double>(),
                              params.at("delta_omega").get<double>(),
                              params.at("drive").get<double>(),
                              params.at("gamma_eg").get<double>(),
                              params.at("gamma_fe").get<double>()});
  if (scenario == "kerr")
    return build_kerr({params.at("detuning").get<double>(), params.at("kerr").get<double>(),
                       complex_from_json(params.at("drive")), params.at("gamma").get<double>(),
                       params.at("truncation").get<int>()});
  if (scenario == "driven-qubit")
    return build_driven_qubit(
        {params.at("omega").get<double>(), params.at("gamma_minus").get<double>()});
  throw std::invalid_argument("unknown scenario '" + scenario + "'");
}

// Sweepable/searchable real parameters. The Kerr drive is complex, hence the
// drive_re / drive_im split.
inline void set_sweep_param(const std::string& scenario, json& params, const std::string& name,
                            double value) {
  if (scenario == "kerr" && (name == "drive_re" || name == "drive_im")) {
    Complex drive = complex_from_json(params.at("drive"));
    drive = (name == "drive_re") ? Complex(value, drive.imag()) : Complex(drive.real(), value);
    params["drive"] = complex_to_json(drive);
    return;
  }
  if (!params.contains(name) || !params.at(name).is_number())
    throw std::invalid_argument("scenario '" + scenario + "' has no sweepable parameter '" + name + "'");
  params[name] = value;
}

// --- run context ----------------------------------------------------------

struct RunContext {
  json config;
  std::string command_echo;
  fs::path out_dir;
  std::string format = "csv";  // csv | json, for tabular outputs
  int threads = 0;
  std::uint64_t seed = 12345;
  std::vector<std::pair<std::string, std::string>> files;  // name -> description

  static RunContext from_config(json config, std::string command_echo) {
    RunContext ctx;
    ctx.config = std::move(config);
    ctx.command_echo = std::move(command_echo);
    ctx.out_dir = ctx.config.contains("out") ? fs::path(ctx.config.at("out").get<std::string>())
                                             : fs::path("betadyne_out");
    if (ctx.config.contains("format")) ctx.format = ctx.config.at("format").get<std::string>();
    if (ctx.format != "csv" && ctx.format != "json")
      throw std::invalid_argument("format must be 'csv' or 'json'");
    if (ctx.config.contains("threads")) ctx.threads = ctx.config.at("threads").get<int>();
    if (ctx.config.contains("seed")) ctx.seed = ctx.config.at("seed").get<std::uint64_t>();
    return ctx;
  }

  void note_file(const std::string& name, const std::string& description) {
    files.emplace_back(name, description);
  }

  void write_text(const std::string& name, const std::string& body, const std::string& description) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / name).string());
    out << body;
    note_file(name, description);
  }

  void write_json(const std::string& name, const json& j, const std::string& description) {
    write_text(name, j.dump(2) + "\n", description);
  }

  void write_manifest(double duration_seconds) {
    json files_json = json::array();
    for (const auto& [name, desc] : files)
      files_json.push_back(json{{"name", name}, {"description", desc}});
    const json manifest{{"command", command_echo},
                        {"config_hash", config_hash(config)},
                        {"version", kVersion},
                        {"files", files_json},
                        {"duration_seconds", duration_seconds}};
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
};

// Resolves the model plus the unraveling: an explicit scenario (with params)
// or a model document (inline or a file path). Config-level "unraveling"
// wins over one embedded in a model file; "beta" is shorthand for the same
// displacement on every channel.
inline std::pair<LindbladModel, UnravelingSpec> resolve_model(const RunContext& ctx) {
  std::optional<LindbladModel> model;
  std::optional<UnravelingSpec> spec;
  if (ctx.config.contains("scenario")) {
    const std::string name = ctx.config.at("scenario").get<std::string>();
    model = build_scenario(name, merged_params(name, ctx.config));
  } else if (ctx.config.contains("model")) {
    const json& mj = ctx.config.at("model");
    json doc;
    if (mj.is_string()) {
      std::ifstream in(mj.get<std::string>());
      if (!in) throw std::invalid_argument("cannot open model file " + mj.get<std::string>());
      in >> doc;
    } else {
      doc = mj;
    }
    auto [m, s] = model_from_json(doc);
    model = std::move(m);
    spec = std::move(s);
  } else {
    throw std::invalid_argument("config needs either \"scenario\" or \"model\"");
  }

  const std::size_t nch = model->channels().size();
  if (ctx.config.contains("unraveling")) {
    const json& uj = ctx.config.at("unraveling");
    if (uj.contains("beta") && !uj.contains("betas")) {
      spec = UnravelingSpec::uniform(complex_from_json(uj.at("beta")), nch);
      if (uj.contains("mixing") && !uj.at("mixing").is_null())
        spec->mixing = matrix_from_json(uj.at("mixing"));
    } else {
      spec = unraveling_from_json(uj);
    }
  }
  if (!spec) spec = UnravelingSpec::uniform(0.0, nch);
  if (spec->betas.size() != nch)
    throw std::invalid_argument("unraveling betas length must match channel count");
  if (spec->mixing && !is_unitary(*spec->mixing, tolerances().structural))
    throw std::invalid_argument("unraveling mixing matrix must be unitary");
  return {std::move(*model), std::move(*spec)};
}

inline Vector resolve_initial_state(const json& ensemble, Eigen::Index dim) {
  if (!ensemble.contains("initial_state")) return basis_ket(dim, 0);
  const json& st = ensemble.at("initial_state");
  if (st.is_number_integer()) return basis_ket(dim, st.get<Eigen::Index>());
  if (st.is_string()) {
    const std::string name = st.get<std::string>();
    if (dim != 2) throw std::invalid_argument("named states are defined for dim 2 only");
    if (name == "excited") return basis_ket(2, 0);
    if (name == "ground") return basis_ket(2, 1);
    if (name == "plus") {
      Vector v(2);
      v << 1.0, 1.0;
      return v / std::sqrt(2.0);
    }
    throw std::invalid_argument("unknown initial state '" + name + "'");
  }
  if (st.is_array()) {
    if (Eigen::Index(st.size()) != dim)
      throw std::invalid_argument("initial state amplitude count must equal dim");
    Vector v(dim);
    for (Eigen::Index k = 0; k < dim; ++k) v(k) = complex_from_json(st.at(std::size_t(k)));
    const double n = v.norm();
    if (n <= 0.0) throw std::invalid_argument("initial state must be nonzero");
    return v / n;
  }
  throw std::invalid_argument("initial_state must be an index, a name, or amplitudes");
}

// --- tabular output -------------------------------------------------------

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const {
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out += columns[c];
      out += (c + 1 < columns.size()) ? ',' : '\n';
    }
    char buf[32];
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.12g", row[c]);
        out += buf;
        out += (c + 1 < row.size()) ? ',' : '\n';
      }
    }
    return out;
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& row : rows) {
      json obj;
      for (std::size_t c = 0; c < row.size(); ++c) obj[columns[c]] = row[c];
      arr.push_back(std::move(obj));
    }
    return arr;
  }

  void write(RunContext& ctx, const std::string& stem, const std::string& description) const {
    if (ctx.format == "json")
      ctx.write_json(stem + ".json", to_json(), description);
    else
      ctx.write_text(stem + ".csv", to_csv(), description);
  }
};

// --- commands ---------------------------------------------------------------

// Branch-tracked spectrum of the displaced no-jump generator along a scenario
// parameter sweep. Columns: param, branch_index, re_E, im_E, min_gap,
// max_overlap; rows ordered by (param, branch).
inline void run_spectrum(RunContext& ctx) {
  if (!ctx.config.contains("sweep")) throw std::invalid_argument("spectrum needs a \"sweep\" block");
  if (!ctx.config.contains("scenario"))
    throw std::invalid_argument("sweeps address scenario parameters; provide \"scenario\"");
  const json& sweep = ctx.config.at("sweep");
  const std::string param = sweep.at("param").get<std::string>();
  const double lo = sweep.at("min").get<double>();
  const double hi = sweep.at("max").get<double>();
  const int points = sweep.at("points").get<int>();
  if (points < 2) throw std::invalid_argument("sweep needs at least 2 points");

  const std::string scenario = ctx.config.at("scenario").get<std::string>();
  const json base_params = merged_params(scenario, ctx.config);
  const auto [base_model, spec] = resolve_model(ctx);
  (void)base_model;

  const std::size_t n_points = std::size_t(points);
  std::vector<double> values(n_points);
  std::vector<EigenSystem> systems(n_points);
  std::vector<CoalescenceReport> reports(n_points);
  parallel_for(n_points, ctx.threads, [&](std::size_t k) {
    const double value = lo + (hi - lo) * double(k) / double(points - 1);
    json params = base_params;
    set_sweep_param(scenario, params, param, value);
    const Matrix h = nhh_beta(build_scenario(scenario, params), spec);
    values[k] = value;
    systems[k] = eigendecompose(h);
    reports[k] = coalescence_from(systems[k]);
  });
  const auto branches = track_branches(systems);

  Table table;
  table.columns = {"param", "branch_index", "re_E", "im_E", "min_gap", "max_overlap"};
  for (std::size_t k = 0; k < values.size(); ++k)
    for (std::size_t b = 0; b < branches.size(); ++b)
      table.rows.push_back({values[k], double(b), branches[b][k].real(), branches[b][k].imag(),
                            reports[k].min_gap, reports[k].max_overlap});
  table.write(ctx, "spectrum", "branch-tracked eigenvalues along the " + param + " sweep");
}

// Eigenvector overlap and eigenvalue gap over a grid of displacements applied
// uniformly to all channels. Columns: re_beta, im_beta, max_overlap, min_gap;
// re varies in the outer loop.
inline void run_overlap_map(RunContext& ctx) {
  if (!ctx.config.contains("grid")) throw std::invalid_argument("overlap-map needs a \"grid\" block");
  const json& grid = ctx.config.at("grid");
  const double re_min = get_or(grid, "re_min", -1.0), re_max = get_or(grid, "re_max", 1.0);
  const double im_min = get_or(grid, "im_min", -1.0), im_max = get_or(grid, "im_max", 1.0);
  const int n_re = grid.contains("points_re") ? grid.at("points_re").get<int>() : 101;
  const int n_im = grid.contains("points_im") ? grid.at("points_im").get<int>() : 101;
  if (n_re < 1 || n_im < 1) throw std::invalid_argument("grid needs at least 1 point per axis");

  const auto [model, spec] = resolve_model(ctx);
  (void)spec;  // the map scans beta itself
  const std::size_t total = std::size_t(n_re) * std::size_t(n_im);
  std::vector<CoalescenceReport> reports(total);
  std::vector<Complex> betas(total);
  const auto& model_ref = model;
  parallel_for(total, ctx.threads, [&](std::size_t idx) {
    const int i = int(idx) / n_im;
    const int j = int(idx) % n_im;
    const double re = (n_re == 1) ? re_min : re_min + (re_max - re_min) * double(i) / double(n_re - 1);
    const double im = (n_im == 1) ? im_min : im_min + (im_max - im_min) * double(j) / double(n_im - 1);
    betas[idx] = Complex(re, im);
    reports[idx] = coalescence_from(eigendecompose(
        nhh_beta(model_ref, UnravelingSpec::uniform(betas[idx], model_ref.channels().size()))));
  });

  Table table;
  table.columns = {"re_beta", "im_beta", "max_overlap", "min_gap"};
  for (std::size_t idx = 0; idx < total; ++idx)
    table.rows.push_back(
        {betas[idx].real(), betas[idx].imag(), reports[idx].max_overlap, reports[idx].min_gap});
  table.write(ctx, "overlap_map", "eigenvector overlap and gap over the displacement plane");
}

inline json eigensystem_to_json(const EigenSystem& sys) {
  json values = json::array(), vectors = json::array();
  for (const Complex e : sys.values) values.push_back(complex_to_json(e));
  for (const Vector& v : sys.vectors) {
    json amp = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) amp.push_back(complex_to_json(v(k)));
    vectors.push_back(std::move(amp));
  }
  return json{{"values", std::move(values)}, {"vectors", std::move(vectors)}};
}

// EP search over the displacement plane or over one real scenario parameter.
// An unconverged search still exits 0: the best point found is data.
inline void run_ep_find(RunContext& ctx) {
  if (!ctx.config.contains("search")) throw std::invalid_argument("ep-find needs a \"search\" block");
  const json& search = ctx.config.at("search");
  const std::string over = search.contains("over") ? search.at("over").get<std::string>() : "beta";
  EPSearchOptions opts;
  opts.tol = get_or(search, "tol", 1e-8);
  if (search.contains("multistart")) opts.multistart_per_axis = search.at("multistart").get<int>();

  EPSearchResult res;
  if (over == "beta") {
    const auto [model, spec] = resolve_model(ctx);
    (void)spec;
    SearchBox box{get_or(search, "re_min", -1.0), get_or(search, "re_max", 1.0),
                  get_or(search, "im_min", -1.0), get_or(search, "im_max", 1.0)};
    const auto& model_ref = model;
    res = find_ep(
        [&](Complex beta) {
          return nhh_beta(model_ref, UnravelingSpec::uniform(beta, model_ref.channels().size()));
        },
        box, opts);
  } else {
    if (!ctx.config.contains("scenario"))
      throw std::invalid_argument("parameter searches need a \"scenario\"");
    const std::string scenario = ctx.config.at("scenario").get<std::string>();
    const json base_params = merged_params(scenario, ctx.config);
    const auto [base_model, spec] = resolve_model(ctx);
    (void)base_model;
    const double lo = search.at("min").get<double>();
    const double hi = search.at("max").get<double>();
    res = find_ep_scalar(
        [&](double value) {
          json params = base_params;
          set_sweep_param(scenario, params, over, value);
          return nhh_beta(build_scenario(scenario, params), spec);
        },
        lo, hi, opts);
  }

  if (!res.converged)
    std::cerr << "warning: EP search did not reach tolerance (best measure "
              << res.report.measure << ")\n";

  const Matrix h_at = [&] {
    if (over == "beta") {
      const auto [model, spec] = resolve_model(ctx);
      (void)spec;
      return nhh_beta(model, UnravelingSpec::uniform(res.location, model.channels().size()));
    }
    const std::string scenario = ctx.config.at("scenario").get<std::string>();
    json params = merged_params(scenario, ctx.config);
    set_sweep_param(scenario, params, over, res.location.real());
    const auto [m2, spec2] = resolve_model(ctx);
    (void)m2;
    return nhh_beta(build_scenario(scenario, params), spec2);
  }();

  const json out{{"over", over},
                 {"location", complex_to_json(res.location)},
                 {"measure", res.report.measure},
                 {"min_gap", res.report.min_gap},
                 {"max_overlap", res.report.max_overlap},
                 {"pair", json::array({res.report.pair.first, res.report.pair.second})},
                 {"converged", res.converged},
                 {"iterations", res.iterations},
                 {"eigensystem", eigensystem_to_json(eigendecompose(h_at))}};
  ctx.write_json("ep_find.json", out, "EP search result with the eigensystem at the optimum");
}

// Seeded trajectory ensemble: unconditional average against the master
// equation, empirical no-jump fraction against the analytic survival, and the
// conditional (postselected) state against pure no-jump propagation.
inline void run_trajectories(RunContext& ctx) {
  const json ensemble = ctx.config.contains("ensemble") ? ctx.config.at("ensemble") : json::object();
  const int count = ensemble.contains("count") ? ensemble.at("count").get<int>() : 1000;
  if (count < 1) throw std::invalid_argument("ensemble count must be >= 1");
  const json time = ctx.config.contains("time") ? ctx.config.at("time") : json::object();
  const TimeGrid grid(get_or(time, "t0", 0.0), get_or(time, "t1", 2.0),
                      time.contains("steps") ? time.at("steps").get<int>() : 400);

  const auto [model, spec] = resolve_model(ctx);
  const LindbladModel unraveled = apply_unraveling(model, spec);
  validate_grid(unraveled, grid);  // fail before any sampling
  const Vector psi0 = resolve_initial_state(ensemble, model.dim());
  const Eigen::Index d = model.dim();
  const std::size_t points = std::size_t(grid.points());

  // master solution and the analytic no-jump oracle
  const auto master = integrate_master(model, Matrix(psi0 * psi0.adjoint()), grid);
  const auto [nojump_states, survival] = propagate_nhh(nhh(unraveled), psi0, grid);

  // chunked ensemble accumulation, merge order fixed by chunk index
  const std::size_t chunk = 64;
  const std::size_t chunks = (std::size_t(count) + chunk - 1) / chunk;
  std::vector<std::vector<Matrix>> part_mean(chunks), part_cond(chunks);
  std::vector<std::vector<double>> part_alive(chunks);
  parallel_for(chunks, ctx.threads, [&, &model_ref = unraveled](std::size_t c) {
    std::vector<Matrix> mean(points, Matrix::Zero(d, d)), cond(points, Matrix::Zero(d, d));
    std::vector<double> alive(points, 0.0);
    const std::size_t lo = c * chunk, hi = std::min<std::size_t>(lo + chunk, std::size_t(count));
    for (std::size_t k = lo; k < hi; ++k) {
      const TrajectoryRecord rec = mc_trajectory(model_ref, psi0, grid, splitmix64_at(ctx.seed, k));
      const double first_jump = rec.jumps.empty() ? std::numeric_limits<double>::infinity()
                                                  : rec.jumps.front().first;
      for (std::size_t i = 0; i < points; ++i) {
        const Matrix proj = rec.states[i] * rec.states[i].adjoint();
        mean[i] += proj;
        if (rec.times[i] < first_jump) {
          cond[i] += proj;
          alive[i] += 1.0;
        }
      }
    }
    part_mean[c] = std::move(mean);
    part_cond[c] = std::move(cond);
    part_alive[c] = std::move(alive);
  });
  std::vector<Matrix> mean(points, Matrix::Zero(d, d)), cond(points, Matrix::Zero(d, d));
  std::vector<double> alive(points, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t i = 0; i < points; ++i) {
      mean[i] += part_mean[c][i];
      cond[i] += part_cond[c][i];
      alive[i] += part_alive[c][i];
    }

  Table table;
  table.columns = {"t"};
  for (Eigen::Index k = 0; k < d; ++k) table.columns.push_back("pop_" + std::to_string(k));
  for (Eigen::Index k = 0; k < d; ++k) table.columns.push_back("master_pop_" + std::to_string(k));
  table.columns.insert(table.columns.end(),
                       {"trace_distance", "nojump_fraction", "survival_analytic",
                        "conditional_distance", "conditional_samples"});

  double max_td = 0.0, max_fraction_err = 0.0, max_cond_dist = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    mean[i] /= double(count);
    const double fraction = alive[i] / double(count);
    std::vector<double> row{grid.time_at(int(i))};
    for (Eigen::Index k = 0; k < d; ++k) row.push_back(mean[i](k, k).real());
    for (Eigen::Index k = 0; k < d; ++k) row.push_back(master[i](k, k).real());
    const double td = trace_distance(mean[i], master[i]);
    max_td = std::max(max_td, td);
    // conditional state vs normalized no-jump propagation; -1 marks an empty sample
    double cond_dist = -1.0;
    if (alive[i] > 0.0) {
      const Matrix cmean = cond[i] / alive[i];
      const Vector pure = nojump_states[i] / nojump_states[i].norm();
      cond_dist = trace_distance(cmean, Matrix(pure * pure.adjoint()));
      if (alive[i] >= 50.0) max_cond_dist = std::max(max_cond_dist, cond_dist);
    }
    if (survival[i] >= 0.05)
      max_fraction_err = std::max(max_fraction_err, std::abs(fraction - survival[i]) / survival[i]);
    row.insert(row.end(), {td, fraction, survival[i], cond_dist, alive[i]});
    table.rows.push_back(std::move(row));
  }
  table.write(ctx, "trajectories",
              "ensemble averages vs master equation, no-jump fraction vs analytic survival");

  const json summary{{"trajectories", count},
                     {"seed", ctx.seed},
                     {"steps", grid.steps},
                     {"max_trace_distance", max_td},
                     {"statistical_bound", 3.0 / std::sqrt(double(count))},
                     {"max_nojump_fraction_rel_error_above_5pct", max_fraction_err},
                     {"max_conditional_distance", max_cond_dist},
                     {"final_nojump_fraction", alive[points - 1] / double(count)},
                     {"final_survival_analytic", survival[points - 1]}};
  ctx.write_json("trajectories_summary.json", summary, "ensemble run summary statistics");
}

// --- the invariance suite --------------------------------------------------

struct ValidationCheck {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

inline std::vector<ValidationCheck> validation_suite(std::uint64_t seed) {
  std::vector<ValidationCheck> checks;
  std::mt19937_64 rng(seed);
  auto push = [&](const std::string& name, double residual, double tolerance) {
    checks.push_back({name, residual, tolerance, residual <= tolerance});
  };

  {  // displacement leaves the Liouvillian fixed
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index dim = 2 + Eigen::Index(rng() % 3);
      const int nch = 1 + int(rng() % 3);
      const LindbladModel m = random_model(rng, dim, nch);
      const LindbladModel t = displace_channels(m, {random_betas(rng, std::size_t(nch)), std::nullopt});
      worst = std::max(worst, (liouvillian_matrix(t) - liouvillian_matrix(m)).norm());
    }
    push("displacement_liouvillian_invariance", worst, 1e-9);
  }
  {  // unitary mixing leaves Liouvillian and no-jump generator fixed
    double worst_l = 0.0, worst_h = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index dim = 2 + Eigen::Index(rng() % 3);
      const int nch = 2 + int(rng() % 2);
      const LindbladModel m = random_model(rng, dim, nch);
      const LindbladModel t = mix_channels(m, random_unitary(rng, nch));
      worst_l = std::max(worst_l, (liouvillian_matrix(t) - liouvillian_matrix(m)).norm());
      worst_h = std::max(worst_h, (nhh(t) - nhh(m)).cwiseAbs().maxCoeff());
    }
    push("mixing_liouvillian_invariance", worst_l, 1e-9);
    push("mixing_nhh_invariance", worst_h, 1e-9);
  }
  {  // two-path equality of the displaced no-jump generator
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index dim = 2 + Eigen::Index(rng() % 3);
      const int nch = 1 + int(rng() % 3);
      const LindbladModel m = random_model(rng, dim, nch);
      UnravelingSpec spec{random_betas(rng, std::size_t(nch)), std::nullopt};
      worst = std::max(worst,
                       (nhh_beta(m, spec) - nhh(displace_channels(m, spec))).cwiseAbs().maxCoeff());
    }
    push("nhh_two_path_equality", worst, 1e-12);
  }
  {  // Kraus map is trace preserving to second order in dt
    const LindbladModel m(Matrix::Zero(2, 2), {{1.0, sigma_minus()}});
    auto resid = [&](double dt) {
      Matrix r = -identity(2);
      for (const auto& k : kraus_step(m, dt)) r += k.adjoint() * k;
      return r.norm();
    };
    const double order = std::log2(resid(2e-3) / resid(1e-3));
    push("kraus_cptp_residual_order", std::abs(order - 2.0), 0.1);
  }
  {  // displaced two-photon Kerr generator, entry by entry
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Complex alpha{u(rng), u(rng)}, beta{u(rng), u(rng)};
      const double gamma = 1.0, kerr = 2.0;
      const Matrix h = nhh_beta(build_kerr({0.0, kerr, alpha, gamma, 3}),
                                UnravelingSpec::uniform(beta, 1));
      Matrix expect = Matrix::Zero(3, 3);
      const Complex as = std::conj(alpha), bs = std::conj(beta);
      expect(0, 1) = kI * as - kI * gamma * bs;
      expect(1, 0) = -kI * alpha;
      expect(1, 1) = -0.5 * kI * gamma;
      expect(1, 2) = kI * std::sqrt(2.0) * (as - gamma * bs);
      expect(2, 1) = -kI * std::sqrt(2.0) * alpha;
      expect(2, 2) = Complex(2.0 * kerr, -gamma);
      expect -= 0.5 * kI * gamma * std::norm(beta) * identity(3);
      worst = std::max(worst, (h - expect).cwiseAbs().maxCoeff());
    }
    push("kerr_truncated_generator_entrywise", worst, 1e-13);
  }
  {  // non-Hermitian Hamiltonians are rejected at construction
    bool rejected = false;
    try {
      json bad = model_to_json(build_driven_qubit({1.0, 1.0}));
      bad["hamiltonian"]["im"][0][0] = 0.3;
      model_from_json(bad);
    } catch (const std::invalid_argument&) {
      rejected = true;
    }
    push("nonhermitian_hamiltonian_rejected", rejected ? 0.0 : 1.0, 0.5);
  }
  return checks;
}

inline bool run_validate(RunContext& ctx) {
  const auto checks = validation_suite(ctx.seed);
  bool all = true;
  json arr = json::array();
  for (const auto& c : checks) {
    all = all && c.passed;
    arr.push_back(json{{"name", c.name},
                       {"residual", c.residual},
                       {"tolerance", c.tolerance},
                       {"passed", c.passed}});
  }
  ctx.write_json("validate.json", json{{"seed", ctx.seed}, {"all_passed", all}, {"checks", arr}},
                 "pass/fail report of the invariance suite");
  return all;
}

inline void run_scenario_dump(RunContext& ctx) {
  auto [model, spec] = resolve_model(ctx);
  ctx.write_json("model.json", model_to_json(model, spec),
                 "model and unraveling in the interchange schema");
}

// Dispatch; returns the process exit code.
inline int run_command(const std::string& mode, json config, const std::string& command_echo) {
  const auto t0 = std::chrono::steady_clock::now();
  RunContext ctx = RunContext::from_config(std::move(config), command_echo);
  int code = 0;
  if (mode == "spectrum") {
    run_spectrum(ctx);
  } else if (mode == "overlap-map") {
    run_overlap_map(ctx);
  } else if (mode == "ep-find") {
    run_ep_find(ctx);
  } else if (mode == "trajectories") {
    run_trajectories(ctx);
  } else if (mode == "validate") {
    if (!run_validate(ctx)) code = 2;
  } else if (mode == "scenario-dump") {
    run_scenario_dump(ctx);
  } else {
    throw std::invalid_argument("unknown command '" + mode + "'");
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ctx.write_manifest(seconds);
  return code;
}

}  // namespace betadyne::cli
