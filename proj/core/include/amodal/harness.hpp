#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amodal/cluster.hpp"
#include "amodal/dataset.hpp"
#include "amodal/eval.hpp"
#include "amodal/losscore.hpp"
#include "amodal/net.hpp"
#include "amodal/oracle.hpp"
#include "amodal/serialization.hpp"

namespace amodal {

const char* software_version();

enum class ExperimentKind { kGtLayers, kSemanticGtSwap, kClusteringGtSwap, kDimSweep, kTrainEval };

const char* experiment_kind_name(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kGtLayers;
  // Geometry, classes and base seed. instances_per_class is replaced by each
  // grid value of `instances` (except for train_eval, which uses it as is).
  SceneConfig scene;
  int num_samples = 200;
  std::vector<int> layers{1, 2, 3, 4};
  std::vector<int> instances{6, 12};
  std::vector<int> embed_dims{1, 2, 3, 4, 5, 6};
  EvalConfig eval;
  ClusterConfig cluster;
  OracleConfig oracle;
  // dim_sweep: oracle embeddings when true, a trained predictor per cell otherwise.
  bool fast = true;
  NetConfig net;
  LossConfig loss;
  TrainConfig train;
  // semantic_gt_swap: checkpoint of a trained predictor. Without one the
  // oracle heads are used with `semantic_corruption` of gate pixels flipped.
  std::string checkpoint;
  double semantic_corruption = 0.1;

  void validate() const;
};

// Defaults per kind (dim_sweep: single rectangle class, N in {6..30}).
ExperimentSpec default_experiment_spec(ExperimentKind kind);

Json to_json(const ExperimentSpec& spec);
// Accepts a bare spec or an experiment manifest (uses its "spec" entry).
// Missing fields take default_experiment_spec(kind) values.
ExperimentSpec experiment_spec_from_json(const Json& j);

// ---- pipeline pieces

// The scene config of grid cell N, with a per-N derived seed.
SceneConfig cell_scene_config(const SceneConfig& base, int per_class);
std::vector<Sample> make_samples(const SceneConfig& config, int count, bool render_image);

// Unit-score detections from layered_gt_masks(L); detection id = instance id.
SampleEval gt_layer_sample_eval(const Sample& sample, int layers);

// Semantic gates default to the argmax of the logits heads.
std::vector<InstanceDetection> detect_instances(const HeadOutputs& heads, const ClusterConfig& config,
                                                const LabelMap* fg_semantic = nullptr,
                                                const LabelMap* occ_semantic = nullptr);

// Detections built from the ground-truth instance maps (clustering replaced
// by ground truth), with σ=0 oracle embeddings for the scores.
std::vector<InstanceDetection> gt_cluster_detections(const Sample& sample, const OracleConfig& oracle,
                                                     const ClusterConfig& config);

// ---- experiments

struct GtLayerCell {
  int instances = 0;
  int layers = 0;
  EvalReport report;
};
std::vector<GtLayerCell> run_gt_layer_ablation(const ExperimentSpec& spec);

struct ClusteringSwapCell {
  int instances = 0;
  EvalReport report;
};
std::vector<ClusteringSwapCell> run_clustering_gt_swap(const ExperimentSpec& spec);

struct SemanticSwapCell {
  int instances = 0;
  EvalReport predicted;
  EvalReport ground_truth;
};
// `predictor` may be null (oracle heads with corrupted gates).
std::vector<SemanticSwapCell> run_semantic_gt_swap(const ExperimentSpec& spec, const Predictor* predictor);

struct DimSweepCell {
  int instances = 0;
  int embed_dim = 0;
  double spacing = 0.0;  // fast mode lattice step
  std::optional<EvalReport> report;  // empty when infeasible
  std::string note;
};
std::vector<DimSweepCell> run_dim_sweep(const ExperimentSpec& spec);

struct TrainEvalResult {
  TrainResult log;
  EvalReport report;
  Predictor predictor;
};
// Trains on streaming samples of spec.scene and evaluates num_samples
// held-out scenes.
TrainEvalResult run_train_eval(const ExperimentSpec& spec, const EpochCallback& on_epoch = {});

// Held-out evaluation samples for a training scene config.
SceneConfig held_out_scene_config(const SceneConfig& train_scene);

NetConfig net_config_for(const ExperimentSpec& spec, const SceneConfig& scene, int embed_dim);

// ---- tables and plots

std::string gt_layer_table_csv(const std::vector<GtLayerCell>& cells);
std::string clustering_swap_table_csv(const std::vector<ClusteringSwapCell>& cells);
std::string semantic_swap_table_csv(const std::vector<SemanticSwapCell>& cells);
std::string dim_sweep_table_csv(const std::vector<DimSweepCell>& cells);
enum class SweepMetric { kAp, kArHeavy };
// Line plot of `metric` against N, one line per C.
std::string dim_sweep_svg(const std::vector<DimSweepCell>& cells, SweepMetric metric);

// Runs the experiment and writes manifest.json plus its tables, reports and
// plots into `out`. Returns a short JSON summary.
Json run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out,
                    const EpochCallback& on_epoch = {});

// ---- prediction files: <dir>/detections.json

struct PredictionSet {
  int num_samples = 0;
  std::vector<std::vector<Detection>> per_sample;  // sorted by detection id
};

PredictionSet predict_dataset(const Predictor& predictor, const Dataset& data, const ClusterConfig& config);
void write_predictions(const std::filesystem::path& dir, const PredictionSet& predictions);
// Entries may appear in any order; duplicates (sample, id) are rejected.
PredictionSet read_predictions(const std::filesystem::path& dir);
// Throws Error(kInvalidArgument) on a sample-count mismatch.
EvalReport evaluate_predictions(const PredictionSet& predictions, const Dataset& data,
                                const EvalConfig& config, bool keep_pr_curves = false);

}  // namespace amodal
