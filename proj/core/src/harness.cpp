#include "amodal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "amodal/error.hpp"
#include "amodal/png_io.hpp"
#include "amodal/rle.hpp"
#include "amodal/rng.hpp"

#ifndef AMODAL_VERSION
#define AMODAL_VERSION "0.0.0"
#endif

namespace amodal {

namespace fs = std::filesystem;

const char* software_version() { return AMODAL_VERSION; }

namespace {

constexpr std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::kGtLayers, "gt_layers"},
    {ExperimentKind::kSemanticGtSwap, "semantic_gt_swap"},
    {ExperimentKind::kClusteringGtSwap, "clustering_gt_swap"},
    {ExperimentKind::kDimSweep, "dim_sweep"},
    {ExperimentKind::kTrainEval, "train_eval"},
};

// Stream ids for derived seeds.
constexpr std::uint64_t kHeldOutStream = 0x68656c64;  // "held"
constexpr std::uint64_t kTrainStream = 0x747261696e;  // "train"
constexpr std::uint64_t kInitStream = 0x696e6974;     // "init"

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

const char* experiment_kind_name(ExperimentKind kind) {
  for (const auto& [k, n] : kKindNames)
    if (k == kind) return n;
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  throw Error(ErrorKind::kInvalidArgument, "unknown experiment kind '" + name + "'");
}

void ExperimentSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kInvalidArgument, "experiment spec: " + m); };
  scene.validate();
  eval.validate();
  cluster.validate();
  oracle.validate();
  loss.validate();
  train.validate();
  if (num_samples < 1) fail("num_samples must be >= 1");
  if (kind == ExperimentKind::kGtLayers && layers.empty()) fail("layers grid is empty");
  if (kind != ExperimentKind::kTrainEval && instances.empty()) fail("instances grid is empty");
  if (kind == ExperimentKind::kDimSweep && embed_dims.empty()) fail("embed_dims grid is empty");
  for (int l : layers)
    if (l < 1) fail("layers must be >= 1");
  for (int n : instances)
    if (n < 1) fail("instances must be >= 1");
  for (int c : embed_dims)
    if (c < 1) fail("embed_dims must be >= 1");
  if (!(semantic_corruption >= 0.0 && semantic_corruption <= 1.0))
    fail("semantic_corruption must lie in [0, 1]");
}

ExperimentSpec default_experiment_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  s.oracle.num_classes = s.scene.num_classes();
  switch (kind) {
    case ExperimentKind::kGtLayers:
    case ExperimentKind::kClusteringGtSwap:
      break;
    case ExperimentKind::kSemanticGtSwap:
      s.instances = {6};
      break;
    case ExperimentKind::kDimSweep:
      s.scene.classes = {ShapeKind::kRectangle};
      s.scene.instances_per_class = {6};
      s.instances = {6, 12, 18, 24, 30};
      s.oracle.num_classes = 1;
      // A fixed L1 budget for all targets: low C has to pack them tighter.
      s.oracle.radius = 4.0;
      s.oracle.compress = true;
      s.oracle.sigma = 0.6;
      s.oracle.normalize_noise = true;
      break;
    case ExperimentKind::kTrainEval:
      s.num_samples = 50;
      s.scene.canvas_size = 128;
      s.scene.label_size = 32;
      s.scene.shape_scale = 23.0;
      s.scene.outline_width = 2.0;
      s.scene.instances_per_class = {2, 2, 2};
      s.net.embed_dim = 4;
      s.net.input_size = 128;
      s.net.output_size = 32;
      s.net.trunk = {{16, 1}, {32, 1}, {32, 1}, {32, 2}, {32, 4}};
      s.train.learning_rate = 1e-3;
      break;
  }
  return s;
}

Json to_json(const ExperimentSpec& s) {
  return Json{{"kind", experiment_kind_name(s.kind)},
              {"scene", to_json(s.scene)},
              {"num_samples", s.num_samples},
              {"layers", s.layers},
              {"instances", s.instances},
              {"embed_dims", s.embed_dims},
              {"eval", to_json(s.eval)},
              {"cluster", to_json(s.cluster)},
              {"oracle", to_json(s.oracle)},
              {"fast", s.fast},
              {"net", to_json(s.net)},
              {"loss", to_json(s.loss)},
              {"train", to_json(s.train)},
              {"checkpoint", s.checkpoint},
              {"semantic_corruption", s.semantic_corruption}};
}

ExperimentSpec experiment_spec_from_json(const Json& input) {
  const Json& j = input.contains("spec") && input.contains("software_version") ? input.at("spec") : input;
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw Error(ErrorKind::kFormat, "experiment spec: missing string field 'kind'");
  const auto kind = parse_experiment_kind(j.at("kind").get<std::string>());
  Json merged = to_json(default_experiment_spec(kind));
  for (const auto& item : j.items()) {
    if (!merged.contains(item.key()))
      throw Error(ErrorKind::kFormat, "experiment spec: unknown field '" + item.key() + "'");
    if (item.value().is_object()) merged[item.key()].merge_patch(item.value());
    else merged[item.key()] = item.value();
  }
  ExperimentSpec s;
  s.kind = kind;
  try {
    s.scene = scene_config_from_json(merged.at("scene"));
    s.num_samples = merged.at("num_samples").get<int>();
    s.layers = merged.at("layers").get<std::vector<int>>();
    s.instances = merged.at("instances").get<std::vector<int>>();
    s.embed_dims = merged.at("embed_dims").get<std::vector<int>>();
    s.eval = eval_config_from_json(merged.at("eval"));
    s.cluster = cluster_config_from_json(merged.at("cluster"));
    s.oracle = oracle_config_from_json(merged.at("oracle"));
    s.fast = merged.at("fast").get<bool>();
    s.net = net_config_from_json(merged.at("net"));
    s.loss = loss_config_from_json(merged.at("loss"));
    s.train = train_config_from_json(merged.at("train"));
    s.checkpoint = merged.at("checkpoint").get<std::string>();
    s.semantic_corruption = merged.at("semantic_corruption").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("experiment spec: ") + e.what());
  }
  // Oracle class count follows the scene unless set explicitly.
  if (!(j.contains("oracle") && j.at("oracle").contains("num_classes")))
    s.oracle.num_classes = s.scene.num_classes();
  s.validate();
  return s;
}

// ---------------------------------------------------------------- pipeline

SceneConfig cell_scene_config(const SceneConfig& base, int per_class) {
  SceneConfig c = base;
  c.instances_per_class.assign(c.classes.size(), per_class);
  c.seed = derive_seed(base.seed, static_cast<std::uint64_t>(per_class));
  return c;
}

std::vector<Sample> make_samples(const SceneConfig& config, int count, bool render_image) {
  RenderOptions opt;
  opt.render_image = render_image;
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(make_sample(config, static_cast<std::uint64_t>(i), opt));
  return out;
}

namespace {

std::vector<GroundTruth> ground_truth_for_eval(const Sample& sample, const EvalConfig& eval) {
  auto gts = ground_truth_from_sample(sample);
  if (!eval.visible_iou)
    for (auto& g : gts) g.visible = Mask();
  return gts;
}

SampleEval sample_eval(const Sample& sample, std::vector<Detection> dets, const EvalConfig& eval) {
  SampleEval se;
  se.ground_truth = ground_truth_for_eval(sample, eval);
  se.detections = std::move(dets);
  return se;
}

ClusterConfig sample_cluster_config(const ClusterConfig& base, std::size_t index) {
  ClusterConfig c = base;
  c.seed = derive_seed(base.seed, index);
  return c;
}

OracleConfig sample_oracle_config(const OracleConfig& base, std::size_t index) {
  OracleConfig c = base;
  c.seed = derive_seed(base.seed, index);
  return c;
}

}  // namespace

SampleEval gt_layer_sample_eval(const Sample& sample, int layers) {
  SampleEval se;
  se.ground_truth = ground_truth_from_sample(sample);
  const auto masks = layered_gt_masks(sample.rendered, sample.scene, layers);
  const auto visible = visible_masks(sample.rendered, sample.scene.size());
  for (int k = 0; k < sample.scene.size(); ++k) {
    if (count_nonzero(masks[k]) == 0) continue;
    se.detections.push_back(
        Detection{k, sample.scene.instances[k].class_id, 1.0, masks[k], visible[k]});
  }
  return se;
}

std::vector<InstanceDetection> detect_instances(const HeadOutputs& heads, const ClusterConfig& config,
                                                const LabelMap* fg_semantic,
                                                const LabelMap* occ_semantic) {
  LabelMap fg_gate = fg_semantic ? *fg_semantic : argmax_labels(heads.fg_logits);
  LabelMap occ_gate = occ_semantic ? *occ_semantic : argmax_labels(heads.occ_logits);
  const auto clusters = cluster_embeddings(heads.fg_embed, heads.occ_embed, fg_gate, occ_gate, config);
  return assemble_detections(clusters, heads.fg_embed, heads.occ_embed, fg_gate, occ_gate, config);
}

std::vector<InstanceDetection> gt_cluster_detections(const Sample& sample, const OracleConfig& oracle,
                                                     const ClusterConfig& config) {
  OracleConfig exact = oracle;
  exact.sigma = 0.0;
  const auto heads = oracle_predict(sample, exact);
  const auto& r = sample.rendered;
  ClusterResult gt;
  gt.fg_labels = r.fg_instance;
  gt.occ_labels = r.occ_instance;
  const int n = sample.scene.size();
  gt.means.assign(n, Vec(exact.embed_dim, 0.0));
  std::vector<int> seen(n, 0);
  auto take = [&](const LabelMap& labels, const FeatureMap& embed) {
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const int v = labels[p];
      if (v == 0 || seen[v - 1]) continue;
      gt.means[v - 1].assign(embed.pixel(p), embed.pixel(p) + embed.channels);
      seen[v - 1] = 1;
    }
  };
  take(r.fg_instance, heads.fg_embed);
  take(r.occ_instance, heads.occ_embed);
  return assemble_detections(gt, heads.fg_embed, heads.occ_embed, r.fg_class, r.occ_class, config);
}

// ---------------------------------------------------------------- experiments

std::vector<GtLayerCell> run_gt_layer_ablation(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<GtLayerCell> cells;
  for (int n : spec.instances) {
    const auto samples = make_samples(cell_scene_config(spec.scene, n), spec.num_samples, false);
    for (int l : spec.layers) {
      std::vector<SampleEval> evals;
      evals.reserve(samples.size());
      for (const auto& s : samples) {
        auto se = gt_layer_sample_eval(s, l);
        if (!spec.eval.visible_iou) {
          for (auto& g : se.ground_truth) g.visible = Mask();
          for (auto& d : se.detections) d.visible = Mask();
        }
        evals.push_back(std::move(se));
      }
      cells.push_back({n, l, evaluate(evals, spec.eval)});
    }
  }
  return cells;
}

std::vector<ClusteringSwapCell> run_clustering_gt_swap(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<ClusteringSwapCell> cells;
  for (int n : spec.instances) {
    const auto samples = make_samples(cell_scene_config(spec.scene, n), spec.num_samples, false);
    std::vector<SampleEval> evals;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto dets = gt_cluster_detections(samples[i], spec.oracle, sample_cluster_config(spec.cluster, i));
      auto converted = to_detections(dets);
      if (!spec.eval.visible_iou)
        for (auto& d : converted) d.visible = Mask();
      evals.push_back(sample_eval(samples[i], std::move(converted), spec.eval));
    }
    cells.push_back({n, evaluate(evals, spec.eval)});
  }
  return cells;
}

std::vector<SemanticSwapCell> run_semantic_gt_swap(const ExperimentSpec& spec, const Predictor* predictor) {
  spec.validate();
  std::vector<SemanticSwapCell> cells;
  for (int n : spec.instances) {
    const auto scene = cell_scene_config(spec.scene, n);
    const auto samples = make_samples(scene, spec.num_samples, predictor != nullptr);
    std::vector<SampleEval> predicted, gated;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      HeadOutputs heads;
      LabelMap fg_pred, occ_pred;
      if (predictor) {
        heads = predictor->forward(s.rendered.image);
        fg_pred = argmax_labels(heads.fg_logits);
        occ_pred = argmax_labels(heads.occ_logits);
      } else {
        heads = oracle_predict(s, sample_oracle_config(spec.oracle, i));
        const int labels = spec.oracle.num_classes + 1;
        fg_pred = corrupt_labels(argmax_labels(heads.fg_logits), spec.semantic_corruption, labels,
                                 derive_seed(spec.oracle.seed ^ 0xF6, i));
        occ_pred = corrupt_labels(argmax_labels(heads.occ_logits), spec.semantic_corruption, labels,
                                  derive_seed(spec.oracle.seed ^ 0x0CC, i));
      }
      const auto cfg = sample_cluster_config(spec.cluster, i);
      predicted.push_back(sample_eval(s, to_detections(detect_instances(heads, cfg, &fg_pred, &occ_pred)), spec.eval));
      gated.push_back(sample_eval(
          s, to_detections(detect_instances(heads, cfg, &s.rendered.fg_class, &s.rendered.occ_class)),
          spec.eval));
    }
    cells.push_back({n, evaluate(predicted, spec.eval), evaluate(gated, spec.eval)});
  }
  return cells;
}

NetConfig net_config_for(const ExperimentSpec& spec, const SceneConfig& scene, int embed_dim) {
  NetConfig c = spec.net;
  c.num_classes = scene.num_classes();
  c.embed_dim = embed_dim;
  c.input_size = scene.canvas_size;
  c.output_size = scene.label_size;
  c.validate();
  return c;
}

SceneConfig held_out_scene_config(const SceneConfig& train_scene) {
  SceneConfig c = train_scene;
  c.seed = derive_seed(train_scene.seed, kHeldOutStream);
  return c;
}

namespace {

Predictor train_predictor(const ExperimentSpec& spec, const SceneConfig& scene, int embed_dim,
                          TrainResult* log, const EpochCallback& on_epoch) {
  Predictor p(net_config_for(spec, scene, embed_dim));
  p.initialize(derive_seed(spec.train.seed, kInitStream));
  SceneConfig stream = scene;
  stream.seed = derive_seed(scene.seed, kTrainStream);
  auto result = train(p, streaming_samples(stream), spec.loss, spec.train, on_epoch);
  if (log) *log = std::move(result);
  return p;
}

EvalReport evaluate_predictor(const Predictor& p, const std::vector<Sample>& samples,
                              const ClusterConfig& cluster, const EvalConfig& eval) {
  std::vector<SampleEval> evals;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto heads = p.forward(samples[i].rendered.image);
    evals.push_back(sample_eval(samples[i],
                                to_detections(detect_instances(heads, sample_cluster_config(cluster, i))),
                                eval));
  }
  return evaluate(evals, eval);
}

}  // namespace

std::vector<DimSweepCell> run_dim_sweep(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<DimSweepCell> cells;
  for (int n : spec.instances) {
    const auto scene = cell_scene_config(spec.scene, n);
    const auto samples = make_samples(scene, spec.num_samples, !spec.fast);
    for (int c : spec.embed_dims) {
      DimSweepCell cell;
      cell.instances = n;
      cell.embed_dim = c;
      if (spec.fast) {
        OracleConfig oc = spec.oracle;
        oc.embed_dim = c;
        oc.num_classes = scene.num_classes();
        try {
          cell.spacing = oracle_spacing(n, oc);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kLatticeInfeasible) throw;
          cell.note = e.what();
          cells.push_back(std::move(cell));
          continue;
        }
        std::vector<SampleEval> evals;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          const auto heads = oracle_predict(samples[i], sample_oracle_config(oc, i));
          evals.push_back(sample_eval(
              samples[i], to_detections(detect_instances(heads, sample_cluster_config(spec.cluster, i))),
              spec.eval));
        }
        cell.report = evaluate(evals, spec.eval);
      } else {
        const auto p = train_predictor(spec, scene, c, nullptr, {});
        cell.report = evaluate_predictor(p, samples, spec.cluster, spec.eval);
        cell.note = "trained";
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

TrainEvalResult run_train_eval(const ExperimentSpec& spec, const EpochCallback& on_epoch) {
  spec.validate();
  TrainEvalResult r;
  r.predictor = train_predictor(spec, spec.scene, spec.net.embed_dim, &r.log, on_epoch);
  const auto held_out = make_samples(held_out_scene_config(spec.scene), spec.num_samples, true);
  r.report = evaluate_predictor(r.predictor, held_out, spec.cluster, spec.eval);
  return r;
}

// ---------------------------------------------------------------- tables

std::string gt_layer_table_csv(const std::vector<GtLayerCell>& cells) {
  std::ostringstream os;
  os << "instances,layers," << report_csv_header() << '\n';
  for (const auto& c : cells) os << c.instances << ',' << c.layers << ',' << report_to_csv_row(c.report) << '\n';
  return os.str();
}

std::string clustering_swap_table_csv(const std::vector<ClusteringSwapCell>& cells) {
  std::ostringstream os;
  os << "instances," << report_csv_header() << '\n';
  for (const auto& c : cells) os << c.instances << ',' << report_to_csv_row(c.report) << '\n';
  return os.str();
}

std::string semantic_swap_table_csv(const std::vector<SemanticSwapCell>& cells) {
  std::ostringstream os;
  os << "instances,gate," << report_csv_header() << '\n';
  for (const auto& c : cells) {
    os << c.instances << ",predicted," << report_to_csv_row(c.predicted) << '\n';
    os << c.instances << ",ground_truth," << report_to_csv_row(c.ground_truth) << '\n';
  }
  return os.str();
}

std::string dim_sweep_table_csv(const std::vector<DimSweepCell>& cells) {
  std::ostringstream os;
  os << "instances,embed_dim,spacing,status," << report_csv_header() << '\n';
  for (const auto& c : cells) {
    os << c.instances << ',' << c.embed_dim << ',' << fmt(c.spacing) << ',';
    if (c.report) os << "ok," << report_to_csv_row(*c.report) << '\n';
    else os << "infeasible,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA\n";
  }
  return os.str();
}

std::string dim_sweep_svg(const std::vector<DimSweepCell>& cells, SweepMetric metric) {
  const double w = 640, h = 400, left = 60, right = 110, top = 30, bottom = 50;
  std::set<int> ns;
  std::map<int, std::vector<std::pair<int, double>>> lines;
  for (const auto& c : cells) {
    ns.insert(c.instances);
    if (!c.report) continue;
    const auto v = metric == SweepMetric::kAp ? c.report->ap : c.report->ar_heavy;
    if (v) lines[c.embed_dim].push_back({c.instances, *v});
  }
  const int nmin = ns.empty() ? 0 : *ns.begin(), nmax = ns.empty() ? 1 : *ns.rbegin();
  auto px = [&](int n) {
    return nmax == nmin ? left + (w - left - right) / 2
                        : left + (w - left - right) * (n - nmin) / double(nmax - nmin);
  };
  auto py = [&](double v) { return top + (h - top - bottom) * (1.0 - v); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                 "#e377c2", "#7f7f7f"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\">"
     << (metric == SweepMetric::kAp ? "AP" : "AR heavy") << " vs instances per class</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << w - right << "\" y2=\"" << py(0)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << py(1)
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    os << "<text x=\"" << left - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << fmt(v).substr(0, 3)
       << "</text>\n";
  }
  for (int n : ns)
    os << "<text x=\"" << px(n) << "\" y=\"" << py(0) + 18 << "\" text-anchor=\"middle\">" << n << "</text>\n";
  os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">N</text>\n";
  int idx = 0;
  for (const auto& [c, pts] : lines) {
    const char* color = colors[idx % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [n, v] : pts) os << px(n) << ',' << py(v) << ' ';
    os << "\"/>\n";
    for (const auto& [n, v] : pts)
      os << "<circle cx=\"" << px(n) << "\" cy=\"" << py(v) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << w - right + 10 << "\" y=\"" << top + 16 * idx + 10 << "\" fill=\"" << color
       << "\">C=" << c << "</text>\n";
    ++idx;
  }
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------- driver

namespace {

Json report_json(const EvalReport& r) { return Json::parse(report_to_json(r, -1)); }

Json delta_json(const EvalReport& a, const EvalReport& b) {
  auto d = [](const std::optional<double>& x, const std::optional<double>& y) {
    return x && y ? Json(*y - *x) : Json(nullptr);
  };
  return Json{{"ap", d(a.ap, b.ap)},           {"ap50", d(a.ap50, b.ap50)},
              {"ap75", d(a.ap75, b.ap75)},     {"ar100", d(a.ar100, b.ar100)},
              {"ar_none", d(a.ar_none, b.ar_none)}, {"ar_partial", d(a.ar_partial, b.ar_partial)},
              {"ar_heavy", d(a.ar_heavy, b.ar_heavy)}};
}

}  // namespace

Json run_experiment(const ExperimentSpec& spec, const fs::path& out, const EpochCallback& on_epoch) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + out.string() + ": " + ec.message());
  Json summary{{"kind", experiment_kind_name(spec.kind)}, {"out", out.string()}};
  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file(out / name, text);
    files.push_back(name);
  };

  switch (spec.kind) {
    case ExperimentKind::kGtLayers: {
      const auto cells = run_gt_layer_ablation(spec);
      Json reports = Json::array();
      for (const auto& c : cells)
        reports.push_back({{"instances", c.instances}, {"layers", c.layers}, {"report", report_json(c.report)}});
      emit("table.csv", gt_layer_table_csv(cells));
      emit("reports.json", reports.dump(2) + "\n");
      summary["cells"] = cells.size();
      break;
    }
    case ExperimentKind::kClusteringGtSwap: {
      const auto cells = run_clustering_gt_swap(spec);
      Json reports = Json::array();
      for (const auto& c : cells) reports.push_back({{"instances", c.instances}, {"report", report_json(c.report)}});
      emit("table.csv", clustering_swap_table_csv(cells));
      emit("reports.json", reports.dump(2) + "\n");
      summary["cells"] = cells.size();
      break;
    }
    case ExperimentKind::kSemanticGtSwap: {
      std::optional<Predictor> predictor;
      if (!spec.checkpoint.empty()) {
        if (!fs::exists(spec.checkpoint))
          throw Error(ErrorKind::kIo, "missing checkpoint " + spec.checkpoint);
        predictor = load_checkpoint(spec.checkpoint);
      }
      const auto cells = run_semantic_gt_swap(spec, predictor ? &*predictor : nullptr);
      Json reports = Json::array();
      for (const auto& c : cells)
        reports.push_back({{"instances", c.instances},
                           {"predicted", report_json(c.predicted)},
                           {"ground_truth", report_json(c.ground_truth)},
                           {"delta", delta_json(c.predicted, c.ground_truth)}});
      emit("table.csv", semantic_swap_table_csv(cells));
      emit("reports.json", reports.dump(2) + "\n");
      summary["source"] = predictor ? "checkpoint" : "oracle";
      break;
    }
    case ExperimentKind::kDimSweep: {
      const auto cells = run_dim_sweep(spec);
      Json reports = Json::array();
      int infeasible = 0;
      for (const auto& c : cells) {
        infeasible += !c.report;
        reports.push_back({{"instances", c.instances},
                           {"embed_dim", c.embed_dim},
                           {"spacing", c.spacing},
                           {"note", c.note},
                           {"report", c.report ? report_json(*c.report) : Json(nullptr)}});
      }
      emit("table.csv", dim_sweep_table_csv(cells));
      emit("reports.json", reports.dump(2) + "\n");
      emit("ap.svg", dim_sweep_svg(cells, SweepMetric::kAp));
      emit("ar_heavy.svg", dim_sweep_svg(cells, SweepMetric::kArHeavy));
      summary["cells"] = cells.size();
      summary["infeasible"] = infeasible;
      break;
    }
    case ExperimentKind::kTrainEval: {
      auto r = run_train_eval(spec, on_epoch);
      save_checkpoint(out / "model.ckpt", r.predictor);
      files.push_back("model.ckpt");
      emit("loss_log.csv", loss_log_csv(r.log));
      emit("report.json", report_to_json(r.report) + "\n");
      summary["ap"] = r.report.ap ? Json(*r.report.ap) : Json(nullptr);
      break;
    }
  }

  Json manifest{{"software_version", software_version()},
                {"spec", to_json(spec)},
                {"seeds",
                 {{"scene", spec.scene.seed},
                  {"cluster", spec.cluster.seed},
                  {"oracle", spec.oracle.seed},
                  {"train", spec.train.seed}}},
                {"outputs", files}};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  summary["outputs"] = files;
  return summary;
}

// ---------------------------------------------------------------- predictions

PredictionSet predict_dataset(const Predictor& predictor, const Dataset& data, const ClusterConfig& config) {
  PredictionSet ps;
  ps.num_samples = static_cast<int>(data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto heads = predictor.forward(data.samples[i].rendered.image);
    ps.per_sample.push_back(to_detections(detect_instances(heads, sample_cluster_config(config, i))));
  }
  return ps;
}

void write_predictions(const fs::path& dir, const PredictionSet& ps) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  Json dets = Json::array();
  for (std::size_t i = 0; i < ps.per_sample.size(); ++i)
    for (const auto& d : ps.per_sample[i])
      dets.push_back({{"sample", i},
                      {"id", d.id},
                      {"class_id", d.class_id},
                      {"score", d.score},
                      {"amodal", to_json(encode_rle(d.amodal))},
                      {"visible", to_json(encode_rle(d.visible))}});
  Json j{{"format_version", 1}, {"num_samples", ps.num_samples}, {"detections", dets}};
  write_file(dir / "detections.json", j.dump() + "\n");
}

PredictionSet read_predictions(const fs::path& dir) {
  const Json j = parse_json_file(dir / "detections.json");
  PredictionSet ps;
  try {
    if (j.at("format_version").get<int>() != 1)
      throw Error(ErrorKind::kFormat, "predictions: unsupported format version");
    ps.num_samples = j.at("num_samples").get<int>();
    if (ps.num_samples < 0) throw Error(ErrorKind::kFormat, "predictions: negative num_samples");
    ps.per_sample.resize(ps.num_samples);
    for (const auto& e : j.at("detections")) {
      const int s = e.at("sample").get<int>();
      if (s < 0 || s >= ps.num_samples)
        throw Error(ErrorKind::kFormat, "predictions: sample index " + std::to_string(s) + " out of range");
      Detection d;
      d.id = e.at("id").get<int>();
      d.class_id = e.at("class_id").get<int>();
      d.score = e.at("score").get<double>();
      d.amodal = decode_rle(rle_from_json(e.at("amodal")));
      if (e.contains("visible")) d.visible = decode_rle(rle_from_json(e.at("visible")));
      ps.per_sample[s].push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("predictions: ") + e.what());
  }
  for (std::size_t s = 0; s < ps.per_sample.size(); ++s) {
    auto& v = ps.per_sample[s];
    std::sort(v.begin(), v.end(), [](const Detection& a, const Detection& b) { return a.id < b.id; });
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k].id == v[k - 1].id)
        throw Error(ErrorKind::kFormat, "predictions: duplicate detection id " + std::to_string(v[k].id) +
                                            " in sample " + std::to_string(s));
  }
  return ps;
}

EvalReport evaluate_predictions(const PredictionSet& ps, const Dataset& data, const EvalConfig& config,
                                bool keep_pr_curves) {
  if (ps.num_samples != static_cast<int>(data.samples.size()))
    throw Error(ErrorKind::kInvalidArgument,
                "prediction/dataset sample count mismatch: " + std::to_string(ps.num_samples) + " vs " +
                    std::to_string(data.samples.size()));
  std::vector<SampleEval> evals;
  evals.reserve(data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    SampleEval se;
    se.ground_truth = ground_truth_from_sample(data.samples[i]);
    se.detections = ps.per_sample[i];
    evals.push_back(std::move(se));
  }
  return evaluate(evals, config, keep_pr_curves);
}

}  // namespace amodal
