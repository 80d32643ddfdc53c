#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <set>

#include <json.hpp>

#include "prizegrowth/diagnostics.hpp"
#include "prizegrowth/effects.hpp"
#include "prizegrowth/inference.hpp"
#include "prizegrowth/matching.hpp"
#include "prizegrowth/panel.hpp"
#include "prizegrowth/pipeline.hpp"
#include "prizegrowth/stats.hpp"
#include "prizegrowth/synth.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace prizegrowth;

namespace {

MatchResult match_from_json(const std::string& text) {
  try {
    return json::parse(text).get<MatchResult>();
  } catch (const json::exception& e) {
    throw InputError(std::string("cannot parse match result: ") + e.what());
  }
}

MatchConfig config_from_json(const std::string& text) {
  if (text.empty()) return MatchConfig{};
  try {
    return json::parse(text).get<MatchConfig>();
  } catch (const json::exception& e) {
    throw InputError(std::string("cannot parse match config: ") + e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "matched growth-gap analysis for longitudinal topic panels";
  m.attr("__version__") = kVersion;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);

  py::class_<Panel>(m, "Panel")
      .def_property_readonly("topic_ids", &Panel::topic_ids)
      .def_property_readonly("disciplines",
                             [](const Panel& p) {
                               return std::vector<std::string>(p.disciplines().begin(),
                                                               p.disciplines().end());
                             })
      .def_property_readonly("measures", &Panel::measures)
      .def_property_readonly("n_topics",
                             [](const Panel& p) { return p.trajectories().size(); })
      .def_property_readonly("n_events", [](const Panel& p) { return p.events().size(); })
      .def("is_treated", &Panel::is_treated);

  m.def("load_panel", &load_panel, py::arg("trajectories"), py::arg("events"),
        "load and validate a panel from its two CSV files");

  m.def(
      "generate",
      [](const std::string& spec_json) {
        GenSpec spec;
        try {
          json::parse(spec_json).get_to(spec);
        } catch (const json::exception& e) {
          throw InputError(std::string("cannot parse gen spec: ") + e.what());
        }
        SynthOutput out = generate(spec);
        py::dict d;
        d["trajectories_csv"] = serialize_trajectories(out.panel);
        d["events_csv"] = serialize_events(out.panel);
        d["ground_truth_json"] = json(out.truth).dump(2) + "\n";
        if (!out.entrant_history_csv.empty()) d["entrant_history_csv"] = out.entrant_history_csv;
        if (!out.funding_csv.empty()) d["funding_csv"] = out.funding_csv;
        return d;
      },
      py::arg("spec_json"), "synthesize a panel; returns the artifact payloads");

  m.def(
      "match",
      [](const Panel& panel, const std::string& config_json) {
        MatchConfig cfg = config_from_json(config_json);
        PoolSet pools = build_all_pools(panel, cfg);
        return json(solve_dom(panel, pools, cfg)).dump(2) + "\n";
      },
      py::arg("panel"), py::arg("config_json") = std::string(),
      "balanced optimal matching; returns the MatchResult JSON");

  m.def(
      "delta_series",
      [](const Panel& panel, const std::string& match_json, const std::string& measure) {
        return json(delta_series(panel, match_from_json(match_json), measure)).dump(2) + "\n";
      },
      py::arg("panel"), py::arg("match_json"), py::arg("measure"));

  m.def(
      "did_beta3",
      [](const Panel& panel, const std::string& match_json, const std::string& measure) {
        RegressionFit fit = did(panel, match_from_json(match_json), DidSpec{measure, false});
        const auto& c = fit.require("treat_x_period");
        return py::make_tuple(c.estimate, c.se, c.p);
      },
      py::arg("panel"), py::arg("match_json"), py::arg("measure"),
      "DiD interaction estimate as (estimate, se, p)");

  m.def("pct_growth", &pct_growth, py::arg("delta"));
  m.def("growth_transform", &growth_transform, py::arg("count"));
  m.def("shannon_entropy", &shannon_entropy, py::arg("probabilities"));
  m.def("binomial_two_sided_p", &binomial_two_sided_p, py::arg("n"), py::arg("k"));
  m.def(
      "ks_test",
      [](std::vector<double> a, std::vector<double> b) {
        KsResult r = ks_test(std::move(a), std::move(b));
        return py::make_tuple(r.d, r.p);
      },
      py::arg("a"), py::arg("b"), "two-sample Kolmogorov-Smirnov (D, p)");
  m.def(
      "jaccard",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        return jaccard(std::set<std::string>(a.begin(), a.end()),
                       std::set<std::string>(b.begin(), b.end()));
      },
      py::arg("a"), py::arg("b"));
}
