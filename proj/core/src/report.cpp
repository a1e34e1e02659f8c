#include <cmath>

#include "json_io.hpp"
#include "launderscope/pipeline.hpp"

namespace launderscope {

namespace {

using detail::Json;

Json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

Json optional_number(const std::optional<double>& v) {
  return v ? number(*v) : Json(nullptr);
}

Json row_json(const std::optional<MetricRow>& row) {
  if (!row) return nullptr;
  return Json{{"auc", number(row->auc)},
              {"b_acc_max", number(row->ba_max)},
              {"b_acc_max_threshold", number(row->ba_max_threshold)},
              {"b_acc_at_0", number(row->ba_at_0)},
              {"tpr_at_0", number(row->tpr_at_0)},
              {"fpr_at_0", number(row->fpr_at_0)},
              {"n_pos", row->n_pos},
              {"n_neg", row->n_neg}};
}

Json histogram_json(const std::optional<Histogram>& h) {
  if (!h) return nullptr;
  Json counts = Json::object();
  for (const auto& [name, c] : h->counts) counts[name] = c;
  return Json{{"bin_edges", h->bin_edges}, {"counts", counts}};
}

Json scorer_json(const ScorerSpec& spec) {
  if (const auto* m = std::get_if<ScorerModel>(&spec)) {
    return Json{{"builtin", detail::model_json(*m)}};
  }
  const auto& ext = std::get<ExternalScorerConfig>(spec);
  return Json{{"external", {{"command", ext.command}, {"timeout_ms", ext.timeout.count()}}}};
}

Json config_json(const PipelineConfig& cfg) {
  return Json{{"sampler",
               {{"n_patches", cfg.sampler.n_patches},
                {"patch_size", cfg.sampler.patch_size},
                {"seed", cfg.sampler.seed}}},
              {"aggregation", {{"top_fraction", cfg.aggregation.top_fraction}}},
              {"stage1", scorer_json(cfg.stage1)},
              {"stage2", scorer_json(cfg.stage2)},
              {"stage1_threshold", number(cfg.stage1_threshold)},
              {"stage2_threshold", number(cfg.stage2_threshold)},
              {"resample_stage2", cfg.resample_stage2}};
}

Json condition_json(const ConditionReport& c) {
  Json labels = Json::array();
  for (ClassLabel l : kAllLabels) labels.push_back(std::string(to_string(l)));
  Json matrix = Json::array();
  for (const auto& row : c.confusion) matrix.push_back(row);

  Json groups = Json::object();
  for (const auto& [name, rows] : c.groups) {
    groups[name] = Json{{"stage1", row_json(rows.stage1)}, {"stage2", row_json(rows.stage2)}};
  }

  Json items = Json::array();
  for (const auto& it : c.items) {
    items.push_back(Json{{"path", it.path},
                         {"label", std::string(to_string(it.label))},
                         {"group", it.group},
                         {"s1", number(it.s1)},
                         {"s2", optional_number(it.s2)},
                         {"predicted", std::string(to_string(it.predicted))}});
  }

  return Json{{"name", c.name},
              {"stage1", row_json(c.stage1)},
              {"stage2", row_json(c.stage2)},
              {"confusion", {{"labels", labels}, {"matrix", matrix}}},
              {"three_class_b_acc_at_0", optional_number(c.three_class_ba)},
              {"histograms",
               {{"stage1", histogram_json(c.stage1_histogram)},
                {"stage2", histogram_json(c.stage2_histogram)}}},
              {"groups", groups},
              {"warnings", c.warnings},
              {"items", items}};
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  Json j;
  j["format"] = "launderscope.report/1";
  j["config"] = config_json(report.config);
  Json ops = Json::array();
  for (const auto& op : report.postproc) ops.push_back(op.name());
  j["postproc"] = ops;
  j["n_items"] = report.n_items;
  Json conditions = Json::array();
  for (const auto& c : report.conditions) conditions.push_back(condition_json(c));
  j["conditions"] = conditions;
  Json skipped = Json::array();
  for (const auto& s : report.skipped) skipped.push_back(Json{{"path", s.path}, {"reason", s.reason}});
  j["skipped"] = skipped;
  j["warnings"] = report.warnings;
  j["invocations"] = {{"stage1", report.stage1_invocations},
                      {"stage2", report.stage2_invocations}};
  if (report.runtime_seconds) j["runtime_seconds"] = *report.runtime_seconds;
  return j.dump(2) + "\n";
}

std::string classification_to_json(const ClassificationResult& result) {
  Json j{{"label", std::string(to_string(result.label))},
         {"s1", number(result.s1)},
         {"s2", optional_number(result.s2)}};
  return j.dump(2) + "\n";
}

}  // namespace launderscope
