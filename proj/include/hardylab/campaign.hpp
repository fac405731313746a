#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardylab/decomposition.hpp"
#include "hardylab/families.hpp"
#include "hardylab/hardy.hpp"
#include "hardylab/io.hpp"
#include "hardylab/kernels.hpp"
#include "hardylab/maximal.hpp"
#include "hardylab/space.hpp"

namespace hardylab {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Campaign runner: executes the config's sections in order, collects a JSON
// summary plus CSV artifacts, and reports one pass/fail verdict per stage.
// Independent stage failures do not abort the run unless fail_fast is set.
// ---------------------------------------------------------------------------
struct CampaignResult {
  ordered_json bundle;
  std::map<std::string, std::string> artifacts;  // filename -> CSV content
  bool pass = true;
};

namespace campdetail {

inline ordered_json fit_json(const FittedConstants& fit) {
  ordered_json j;
  j["scale"] = fit.scale;
  j["c"] = fit.c;
  j["C1"] = fit.C1;
  j["C2"] = fit.C2;
  j["C3"] = fit.C3;
  j["gamma"] = fit.gamma;
  j["lambda"] = std::isfinite(fit.lambda) ? fit.lambda : -1.0;
  j["certified"] = fit.certified;
  ordered_json margins;
  for (const auto& kv : fit.margins) margins[kv.first] = kv.second;
  j["margins"] = margins;
  j["witnesses"] = fit.witnesses;
  j["warnings"] = fit.warnings;
  return j;
}

inline ordered_json ledger_json(const ConstantLedger& lg) {
  ordered_json j;
  j["D"] = lg.D;
  j["gamma"] = lg.gamma;
  j["A"] = lg.space_A;
  j["c"] = lg.c;
  j["c1"] = lg.c1;
  j["c2"] = lg.c2;
  j["kappa"] = lg.kappa;
  j["sigma"] = lg.sigma;
  j["L"] = lg.L;
  j["C_half"] = lg.C_half;
  j["C_3half"] = lg.C_3half;
  j["delta"] = lg.delta;
  j["eta"] = lg.eta;
  j["rho"] = lg.rho;
  j["p"] = lg.p;
  j["E"] = lg.E;
  j["feasible"] = lg.feasible;
  if (!lg.binding.empty()) j["binding"] = lg.binding;
  ordered_json conds;
  for (const auto& kv : lg.conditions) conds[kv.first] = kv.second;
  j["conditions"] = conds;
  j["warnings"] = lg.warnings;
  return j;
}

}  // namespace campdetail

// full decomposition record: ledger block, per-level arrays and the residual
// ratio trace
inline ordered_json decomposition_json(const Decomposition& dec) {
  ordered_json j;
  j["ledger"] = campdetail::ledger_json(dec.ledger);
  j["basepoint"] = dec.basepoint;
  j["rescale"] = dec.rescale;
  j["ok"] = dec.ok;
  if (!dec.failure.empty()) j["failure"] = dec.failure;
  ordered_json levels = ordered_json::array();
  for (const auto& lv : dec.levels) {
    ordered_json lj;
    lj["centers"] = lv.centers;
    lj["times"] = lv.times;
    lj["signs"] = lv.signs;
    lj["coefficients"] = lv.coeffs;
    lj["residual_ratio"] = lv.residual_ratio;
    lj["w_ratio"] = lv.w_apriori_ratio;
    lj["overlap"] = lv.overlap;
    lj["below_resolution"] = lv.below_resolution;
    levels.push_back(lj);
  }
  j["levels"] = levels;
  return j;
}

// JSON sidecar for an atom/ion stored as a field CSV
inline ordered_json atom_sidecar_json(const Ball& ball, double scale, const std::string& flavor,
                                      const AtomCheck& check) {
  ordered_json j;
  j["ball"] = {{"center", ball.center}, {"radius", ball.radius}};
  j["scale"] = scale;
  j["flavor"] = flavor;
  j["margins"] = {{"size", check.size_bound - check.lp_norm}, {"mean", check.mean}};
  j["ok"] = check.ok;
  return j;
}

inline ordered_json atom_suite_json(const AtomSuiteReport& rep) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : rep.rows) {
    ordered_json rj;
    rj["flavor"] = row.flavor;
    rj["r_B"] = row.r_B;
    rj["total"] = row.total;
    rj["near"] = row.near;
    rj["far"] = row.far;
    rj["shape"] = row.shape;
    rows.push_back(rj);
  }
  return rows;
}

class Campaign {
public:
  explicit Campaign(const Config& cfg, bool fail_fast = false)
      : cfg_(cfg), fail_fast_(fail_fast) {
    seed_ = 1;
    if (cfg.globals.count("seed")) seed_ = std::stoull(cfg.globals.at("seed"));
    rng_ = std::make_unique<Rng>(seed_);
  }

  CampaignResult run() {
    CampaignResult res;
    res.bundle["schema"] = 1;
    res.bundle["seed"] = seed_;
    res.bundle["stages"] = ordered_json::array();
    for (const ConfigSection& sec : cfg_.sections) {
      ordered_json stage;
      stage["kind"] = sec.kind;
      stage["name"] = sec.name;
      bool pass = false;
      try {
        pass = run_stage(sec, stage, res);
      } catch (const std::exception& ex) {
        stage["error"] = ex.what();
        pass = false;
      }
      stage["pass"] = pass;
      res.bundle["stages"].push_back(stage);
      if (!pass) {
        res.pass = false;
        if (fail_fast_) break;
      }
    }
    res.bundle["pass"] = res.pass;
    return res;
  }

private:
  const DiscreteSpace& need_space(const std::string& name) const {
    auto it = spaces_.find(name);
    if (it == spaces_.end()) throw ConfigError("unknown space: " + name);
    return *it->second;
  }

  struct KernelEntry {
    Kernel kernel;
    std::string space;
    FittedConstants fit;
    bool certified = false;
    Kernel scaled;
    std::unique_ptr<ConstantLedger> ledger;
  };

  KernelEntry& need_kernel(const std::string& name) {
    auto it = kernels_.find(name);
    if (it == kernels_.end()) throw ConfigError("unknown kernel: " + name);
    return *it->second;
  }

  KernelEntry& need_certified(const std::string& name) {
    KernelEntry& entry = need_kernel(name);
    if (!entry.certified)
      throw ConfigError("kernel '" + name + "' has not passed a certify stage");
    return entry;
  }

  const ConstantLedger& need_ledger(KernelEntry& entry) {
    if (!entry.ledger) {
      const DiscreteSpace& space = need_space(entry.space);
      auto ledger = std::make_unique<ConstantLedger>(
          choose_constants(space, space.nearest_to_origin(), entry.fit));
      if (!ledger->feasible)
        throw std::runtime_error("infeasible constant ledger, binding constraint: " +
                                 ledger->binding);
      entry.ledger = std::move(ledger);
    }
    return *entry.ledger;
  }

  bool run_stage(const ConfigSection& sec, ordered_json& stage, CampaignResult& res) {
    if (sec.kind == "space") return stage_space(sec, stage);
    if (sec.kind == "kernel") return stage_kernel(sec, stage);
    if (sec.kind == "certify") return stage_certify(sec, stage);
    if (sec.kind == "decompose") return stage_decompose(sec, stage, res);
    if (sec.kind == "majorize") return stage_majorize(sec, stage);
    if (sec.kind == "hardy-suite") return stage_hardy(sec, stage);
    throw ConfigError("section [" + sec.kind + " " + sec.name + "] (line " +
                      std::to_string(sec.line) + "): unknown stage kind '" + sec.kind + "'");
  }

  bool stage_space(const ConfigSection& sec, ordered_json& stage) {
    std::string topo = section_get(sec, "topology");
    std::unique_ptr<DiscreteSpace> sp;
    if (topo == "grid") {
      sp = std::make_unique<DiscreteSpace>(DiscreteSpace::grid(
          section_int(sec, "dimension", 1), section_double(sec, "extent"),
          section_double(sec, "spacing")));
    } else if (topo == "torus") {
      sp = std::make_unique<DiscreteSpace>(DiscreteSpace::torus(
          section_int(sec, "dimension", 1), section_double(sec, "period"),
          section_double(sec, "spacing")));
    } else if (topo == "explicit-table") {
      sp = std::make_unique<DiscreteSpace>(
          read_space_csv(section_get(sec, "points_file"), section_get(sec, "dist_file", "")));
    } else {
      throw ConfigError("section [" + sec.kind + " " + sec.name + "] key 'topology': unknown value '" +
                        topo + "'");
    }
    stage["points"] = sp->size();
    stage["spacing"] = sp->spacing();
    stage["total_measure"] = sp->total_measure();

    bool pass = true;
    if (sec.keys.count("ahlfors_D")) {
      double D = section_double(sec, "ahlfors_D");
      double r_lo = section_double(sec, "r_lo", 4.0 * sp->spacing());
      double r_hi = section_double(sec, "r_hi", 0.45 * sp->diameter());
      double a_max = section_double(sec, "a_max", 50.0);
      AhlforsReport rep = verify_ahlfors(*sp, D, ahlfors_radius_grid(r_lo, r_hi), a_max);
      ordered_json aj;
      aj["fitted_A"] = rep.fitted_A;
      aj["worst_ratio_low"] = rep.worst_ratio_low;
      aj["worst_ratio_high"] = rep.worst_ratio_high;
      ordered_json viols = ordered_json::array();
      for (const auto& v : rep.violations) {
        ordered_json vj;
        vj["center"] = v.center;
        vj["radius"] = v.radius;
        vj["measure"] = v.measure;
        vj["side"] = v.side;
        viols.push_back(vj);
      }
      aj["violations"] = viols;
      aj["certified"] = rep.certified;
      stage["ahlfors"] = aj;
      pass = rep.certified;
    }
    spaces_[sec.name] = std::move(sp);
    return pass;
  }

  bool stage_kernel(const ConfigSection& sec, ordered_json& stage) {
    std::string kind = section_get(sec, "kind");
    const std::string space_name = section_get(sec, "space");
    const DiscreteSpace& space = need_space(space_name);
    auto entry = std::make_unique<KernelEntry>();
    entry->space = space_name;
    if (kind == "bump") {
      Profile p = named_profile(section_get(sec, "profile", "triangle"),
                                section_double(sec, "gamma", 1.0));
      entry->kernel = make_bump_kernel(space, p);
    } else if (kind == "poisson_model") {
      entry->kernel = make_poisson_model(space);
    } else if (kind == "heat_torus") {
      entry->kernel = make_heat_torus(space);
    } else if (kind == "subordinated") {
      double alpha = section_double(sec, "alpha");
      auto sub = std::make_shared<Subordinator>(alpha);
      entry->kernel = make_subordinated(space, alpha, sub);
    } else {
      throw ConfigError("section [" + sec.kind + " " + sec.name +
                        "] key 'kind': unknown kernel kind '" + kind + "'");
    }
    stage["kernel_kind"] = entry->kernel.kind;
    stage["gamma"] = entry->kernel.gamma;
    kernels_[sec.name] = std::move(entry);
    return true;
  }

  bool stage_certify(const ConfigSection& sec, ordered_json& stage) {
    KernelEntry& entry = need_kernel(section_get(sec, "kernel"));
    const DiscreteSpace& space = need_space(entry.space);
    SampleBudget budget;
    budget.max_centers = section_int(sec, "max_centers", 96);
    budget.max_partners = section_int(sec, "max_partners", 256);
    budget.seed = seed_;
    double gamma = section_double(sec, "gamma", entry.kernel.gamma);
    double lambda = section_double(sec, "lambda", -1.0);
    entry.fit =
        verify_lai(entry.kernel, space, gamma, lambda > 0.0 ? lambda : kInf, budget);
    entry.certified = entry.fit.certified;
    if (entry.certified) entry.scaled = entry.kernel.scaled(entry.fit.scale);
    stage["fit"] = campdetail::fit_json(entry.fit);
    return entry.certified;
  }

  bool stage_decompose(const ConfigSection& sec, ordered_json& stage, CampaignResult& res) {
    KernelEntry& entry = need_certified(section_get(sec, "kernel"));
    const DiscreteSpace& space = need_space(entry.space);
    const ConstantLedger& ledger = need_ledger(entry);
    stage["ledger"] = campdetail::ledger_json(ledger);

    int o = space.nearest_to_origin();
    int levels = section_int(sec, "levels", 12);
    int n_cutoffs = section_int(sec, "cutoffs", 3);
    int n_samples = section_int(sec, "samples", 3);
    std::vector<Field> cutoffs = make_cutoff_family(space, o, ledger.gamma, n_cutoffs);
    std::uint64_t stream = Rng::stream_of("decompose:" + sec.name);

    bool pass = true;
    ordered_json runs = ordered_json::array();
    std::ostringstream trace;
    trace << "run,level,centers,residual_ratio,w_ratio\n";
    int run_id = 0;
    for (int ci = 0; ci < n_cutoffs; ++ci) {
      for (int fi = 0; fi < n_samples; ++fi) {
        Field f = random_smooth_field(space, *rng_, stream, fi);
        Decomposition dec =
            uchiyama_decompose(cutoffs[ci], entry.scaled, ledger, f, levels, o);
        auto [sum, rep] = reconstruct(dec);
        ordered_json rj;
        rj["cutoff"] = ci;
        rj["sample"] = fi;
        rj["levels"] = static_cast<int>(dec.levels.size());
        rj["ok"] = dec.ok;
        if (!dec.failure.empty()) rj["failure"] = dec.failure;
        double worst_res = 0.0, worst_w = 0.0;
        for (std::size_t li = 0; li < dec.levels.size(); ++li) {
          const auto& lv = dec.levels[li];
          worst_res = std::max(worst_res, lv.residual_ratio);
          worst_w = std::max(worst_w, lv.w_apriori_ratio);
          trace << run_id << "," << li << "," << lv.centers.size() << ","
                << ioutil::fmt(lv.residual_ratio) << "," << ioutil::fmt(lv.w_apriori_ratio)
                << "\n";
        }
        rj["worst_residual_ratio"] = worst_res;
        rj["worst_w_ratio"] = worst_w;
        rj["reconstruction_identity_error"] = rep.identity_error;
        rj["residual_sup"] = rep.residual_sup;
        rj["residual_bound"] = rep.residual_bound;
        pass = pass && dec.ok && rep.bound_ok && rep.identity_error < 1e-12;
        runs.push_back(rj);
        if (run_id == 0)
          res.artifacts[sec.name + "_decomposition.json"] =
              decomposition_json(dec).dump(2) + "\n";
        ++run_id;
      }
    }
    stage["runs"] = runs;
    res.artifacts[sec.name + "_residual_trace.csv"] = trace.str();
    return pass;
  }

  bool stage_majorize(const ConfigSection& sec, ordered_json& stage) {
    KernelEntry& entry = need_certified(section_get(sec, "kernel"));
    const DiscreteSpace& space = need_space(entry.space);
    const ConstantLedger& ledger = need_ledger(entry);
    int o = space.nearest_to_origin();
    int n_samples = section_int(sec, "samples", 20);
    int n_cutoffs = section_int(sec, "cutoffs", 4);
    std::vector<Field> cutoffs = make_cutoff_family(space, o, ledger.gamma, n_cutoffs);
    std::uint64_t stream = Rng::stream_of("majorize:" + sec.name);
    std::vector<Field> samples;
    for (int i = 0; i < n_samples; ++i)
      samples.push_back(random_smooth_field(space, *rng_, stream, i));
    MajorizationReport rep =
        majorization_check(cutoffs, samples, entry.scaled, ledger, o);
    entry.ledger->E = rep.E;
    stage["E"] = rep.E;
    stage["rows"] = static_cast<int>(rep.rows.size());
    stage["degenerate"] = rep.degenerate;
    stage["p"] = ledger.p;
    return rep.degenerate == 0 && std::isfinite(rep.E) && rep.E > 0.0;
  }

  bool stage_hardy(const ConfigSection& sec, ordered_json& stage) {
    KernelEntry& entry = need_certified(section_get(sec, "kernel"));
    const DiscreteSpace& space = need_space(entry.space);
    int count = section_int(sec, "count", 40);
    double scale = section_double(sec, "scale", 0.25);
    double lambda = section_double(sec, "lambda", 0.25);
    SplitKernel split = split_ai(entry.scaled, lambda);
    stage["tail_norm"] = split.tail_norm;
    AtomSuiteReport rep = atom_maximal_suite(split.local, lambda, count, scale, *rng_,
                                             "hardy-suite:" + sec.name);
    stage["max_total_standard"] = rep.max_total_standard;
    stage["max_total_global"] = rep.max_total_global;
    stage["fitted_shape_C"] = rep.fitted_shape_C;
    stage["atoms"] = static_cast<int>(rep.rows.size());
    stage["degenerate"] = rep.degenerate;
    stage["rows"] = atom_suite_json(rep);
    (void)space;
    return rep.degenerate == 0 && rep.rows.size() == static_cast<std::size_t>(count) &&
           std::isfinite(rep.max_total_standard) && std::isfinite(rep.max_total_global);
  }

  Config cfg_;
  bool fail_fast_;
  std::uint64_t seed_;
  std::unique_ptr<Rng> rng_;
  std::map<std::string, std::unique_ptr<DiscreteSpace>> spaces_;
  std::map<std::string, std::unique_ptr<KernelEntry>> kernels_;
};

inline CampaignResult run_campaign(const Config& cfg, bool fail_fast = false) {
  Campaign c(cfg, fail_fast);
  return c.run();
}

inline void write_bundle(const CampaignResult& res, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/summary.json", res.bundle.dump(2) + "\n");
  for (const auto& kv : res.artifacts) write_text_file(out_dir + "/" + kv.first, kv.second);
}

// ---------------------------------------------------------------------------
// Bundle rendering.
// ---------------------------------------------------------------------------
inline ordered_json load_bundle(const std::string& path) {
  std::string file = path;
  if (std::filesystem::is_directory(path)) file = path + "/summary.json";
  ordered_json j = ordered_json::parse(read_text_file(file));
  if (!j.contains("schema") || j["schema"].get<int>() != 1)
    throw std::runtime_error("bundle schema mismatch (expected schema 1)");
  return j;
}

inline std::string render_report(const ordered_json& bundle, const std::string& format) {
  if (format == "json") return bundle.dump(2) + "\n";
  if (format == "csv") {
    std::ostringstream os;
    os << "stage,name,pass\n";
    for (const auto& st : bundle.at("stages"))
      os << st.at("kind").get<std::string>() << "," << st.at("name").get<std::string>() << ","
         << (st.at("pass").get<bool>() ? "1" : "0") << "\n";
    return os.str();
  }
  if (format == "md") {
    std::ostringstream os;
    os << "# Campaign summary\n\n";
    os << "seed: " << bundle.at("seed") << "\n\n";
    os << "| stage | name | verdict |\n|---|---|---|\n";
    for (const auto& st : bundle.at("stages"))
      os << "| " << st.at("kind").get<std::string>() << " | " << st.at("name").get<std::string>()
         << " | " << (st.at("pass").get<bool>() ? "pass" : "FAIL") << " |\n";
    os << "\n";
    for (const auto& st : bundle.at("stages")) {
      os << "## " << st.at("kind").get<std::string>() << " " << st.at("name").get<std::string>()
         << "\n\n";
      if (st.contains("error")) os << "error: " << st.at("error").get<std::string>() << "\n\n";
      if (st.contains("ledger")) {
        const auto& lg = st.at("ledger");
        os << "ledger: kappa=" << lg.at("kappa") << " sigma=" << lg.at("sigma")
           << " delta=" << lg.at("delta") << " eta=" << lg.at("eta") << " p=" << lg.at("p")
           << " feasible=" << (lg.at("feasible").get<bool>() ? "yes" : "no") << "\n\n";
        if (lg.contains("binding")) os << "binding constraint: " << lg.at("binding") << "\n\n";
      }
      if (st.contains("fit")) {
        const auto& fit = st.at("fit");
        os << "fit: scale=" << fit.at("scale") << " c=" << fit.at("c")
           << " certified=" << (fit.at("certified").get<bool>() ? "yes" : "no") << "\n\n";
      }
      if (st.contains("E")) os << "measured E: " << st.at("E") << "\n\n";
    }
    os << (bundle.at("pass").get<bool>() ? "**overall: pass**\n" : "**overall: FAIL**\n");
    return os.str();
  }
  throw std::invalid_argument("render_report: unknown format '" + format + "'");
}

}  // namespace hardylab
