#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "amodal/cluster.hpp"
#include "amodal/dataset.hpp"
#include "amodal/error.hpp"
#include "amodal/harness.hpp"
#include "amodal/net.hpp"
#include "amodal/png_io.hpp"
#include "amodal/rng.hpp"
#include "amodal/serialization.hpp"

namespace fs = std::filesystem;
using namespace amodal;

namespace {

void print_error(const std::string& kind, const std::string& message) {
  std::cout << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
}

Json read_optional(const std::string& path) {
  return path.empty() ? Json::object() : parse_json_file(path);
}

template <typename T, typename F>
T section(const Json& j, const char* key, F parse) {
  return j.contains(key) ? parse(j.at(key)) : T{};
}

int cmd_generate(const std::string& config_path, const std::string& out, std::optional<int> count_flag) {
  const Json j = parse_json_file(config_path);
  SceneConfig scene;
  int count = 100;
  if (j.contains("scene")) {
    for (const auto& item : j.items())
      if (item.key() != "scene" && item.key() != "count")
        throw Error(ErrorKind::kFormat, "generate config: unknown field '" + item.key() + "'");
    scene = scene_config_from_json(j.at("scene"));
    if (j.contains("count")) count = j.at("count").get<int>();
  } else {
    scene = scene_config_from_json(j);
  }
  if (count_flag) count = *count_flag;
  generate_dataset(out, scene, count);
  std::cout << Json{{"dataset", out}, {"count", count}, {"manifest_hash", manifest_hash(out)}}.dump() << std::endl;
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path, const std::string& out,
              std::string loss_log) {
  const Json j = read_optional(config_path);
  for (const auto& item : j.items())
    if (item.key() != "net" && item.key() != "loss" && item.key() != "train")
      throw Error(ErrorKind::kFormat, "train config: unknown field '" + item.key() + "'");
  auto data = read_dataset(data_dir);
  NetConfig net = section<NetConfig>(j, "net", net_config_from_json);
  net.num_classes = data.config.num_classes();
  net.input_size = data.config.canvas_size;
  net.output_size = data.config.label_size;
  net.validate();
  const LossConfig loss = section<LossConfig>(j, "loss", loss_config_from_json);
  TrainConfig train_cfg = section<TrainConfig>(j, "train", train_config_from_json);
  if (!(j.contains("train") && j.at("train").contains("samples_per_epoch")))
    train_cfg.samples_per_epoch = static_cast<int>(data.samples.size());
  Predictor p(net);
  p.initialize(derive_seed(train_cfg.seed, 0));
  const auto result = amodal::train(p, dataset_samples(std::move(data.samples), train_cfg.seed), loss, train_cfg,
                                    [](const EpochLog& e) {
                                      std::cerr << "epoch " << e.epoch << " total " << e.mean.total << '\n';
                                    });
  save_checkpoint(out, p);
  if (loss_log.empty()) loss_log = out + ".loss.csv";
  write_file(loss_log, loss_log_csv(result));
  std::cout << Json{{"checkpoint", out}, {"loss_log", loss_log}, {"epochs", result.epochs.size()}}.dump()
            << std::endl;
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& data_dir, const std::string& out,
                const std::string& cluster_path, const std::string& debug_dir) {
  const Json cj = read_optional(cluster_path);
  const ClusterConfig cluster = cluster_config_from_json(cj);
  const Predictor p = load_checkpoint(ckpt);
  const auto data = read_dataset(data_dir);
  PredictionSet ps;
  ps.num_samples = static_cast<int>(data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto heads = p.forward(data.samples[i].rendered.image);
    ClusterConfig c = cluster;
    c.seed = derive_seed(cluster.seed, i);
    const auto fg = argmax_labels(heads.fg_logits), occ = argmax_labels(heads.occ_logits);
    const auto clusters = cluster_embeddings(heads.fg_embed, heads.occ_embed, fg, occ, c);
    const auto dets = assemble_detections(clusters, heads.fg_embed, heads.occ_embed, fg, occ, c);
    if (!debug_dir.empty()) write_cluster_debug(fs::path(debug_dir) / std::to_string(i), clusters, dets);
    ps.per_sample.push_back(to_detections(dets));
  }
  write_predictions(out, ps);
  std::cout << Json{{"predictions", (fs::path(out) / "detections.json").string()}, {"samples", ps.num_samples}}.dump()
            << std::endl;
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& data_dir, const std::string& report_path,
             const std::string& config_path, const std::string& csv_path, const std::string& pr_path) {
  const EvalConfig cfg = eval_config_from_json(read_optional(config_path));
  const auto ps = read_predictions(pred);
  const auto data = read_dataset(data_dir);
  const auto report = evaluate_predictions(ps, data, cfg, !pr_path.empty());
  write_file(report_path, report_to_json(report) + "\n");
  if (!csv_path.empty()) write_file(csv_path, report_csv_header() + "\n" + report_to_csv_row(report) + "\n");
  if (!pr_path.empty()) write_file(pr_path, pr_curves_csv(report));
  std::cout << report_to_json(report, -1) << std::endl;
  return 0;
}

int cmd_ablate(const std::string& kind, const std::string& spec_path, const std::string& out) {
  Json j = spec_path.empty() ? Json::object() : parse_json_file(spec_path);
  Json& body = j.contains("spec") && j.contains("software_version") ? j["spec"] : j;
  if (body.contains("kind") && body.at("kind") != kind)
    throw Error(ErrorKind::kInvalidArgument, "--kind " + kind + " disagrees with spec kind " + body.at("kind").dump());
  body["kind"] = kind;
  const auto spec = experiment_spec_from_json(j);
  const auto summary = run_experiment(spec, out, [](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch << " total " << e.mean.total << '\n';
  });
  std::cout << summary.dump() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layered-embedding amodal instance segmentation toolkit"};
  app.set_version_flag("--version", std::string(software_version()));
  app.require_subcommand(1);

  std::string config, out, data, ckpt, pred, report, kind, spec, cluster, debug, csv, pr, loss_log;
  std::optional<int> count;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--config", config, "Scene config JSON")->required();
  gen->add_option("--out", out, "Output dataset directory")->required();
  gen->add_option("--count", count, "Number of samples (overrides the config)");

  auto* tr = app.add_subcommand("train", "Train a predictor on a dataset");
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--config", config, "JSON with optional net/loss/train sections");
  tr->add_option("--out", out, "Checkpoint path")->required();
  tr->add_option("--loss-log", loss_log, "Loss log CSV (default <out>.loss.csv)");

  auto* pd = app.add_subcommand("predict", "Run a checkpoint and cluster its embeddings");
  pd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  pd->add_option("--data", data, "Dataset directory")->required();
  pd->add_option("--out", out, "Prediction directory")->required();
  pd->add_option("--cluster", cluster, "Cluster config JSON");
  pd->add_option("--debug", debug, "Write per-sample cluster visualizations here");

  auto* ev = app.add_subcommand("eval", "Score predictions against a dataset");
  ev->add_option("--pred", pred, "Prediction directory")->required();
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--report", report, "Report JSON path")->required();
  ev->add_option("--config", config, "Eval config JSON");
  ev->add_option("--csv", csv, "Also write the report as CSV");
  ev->add_option("--pr-curves", pr, "Write PR-curve points as CSV");

  auto* ab = app.add_subcommand("ablate", "Run an experiment grid");
  ab->add_option("--kind", kind, "Experiment kind")
      ->required()
      ->check(CLI::IsMember({"gt_layers", "semantic_gt_swap", "clustering_gt_swap", "dim_sweep", "train_eval"}));
  ab->add_option("--spec", spec, "Experiment spec JSON (or a previous manifest.json)");
  ab->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*gen) return cmd_generate(config, out, count);
    if (*tr) return cmd_train(data, config, out, loss_log);
    if (*pd) return cmd_predict(ckpt, data, out, cluster, debug);
    if (*ev) return cmd_eval(pred, data, report, config, csv, pr);
    if (*ab) return cmd_ablate(kind, spec, out);
  } catch (const Error& e) {
    print_error(error_kind_name(e.kind()), e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    print_error("format", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
