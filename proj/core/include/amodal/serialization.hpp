#pragma once

#include <nlohmann/json.hpp>

#include "amodal/cluster.hpp"
#include "amodal/eval.hpp"
#include "amodal/losscore.hpp"
#include "amodal/net.hpp"
#include "amodal/oracle.hpp"
#include "amodal/rle.hpp"
#include "amodal/scenegen.hpp"

namespace amodal {

using Json = nlohmann::json;

// Readers start from the defaults and override the keys present. Unknown
// keys and type errors throw Error(kFormat); invalid values throw
// Error(kInvalidArgument) through the type's validate().
Json to_json(const SceneConfig& c);
SceneConfig scene_config_from_json(const Json& j);

Json to_json(const Scene& s);
Scene scene_from_json(const Json& j);

Json to_json(const NetConfig& c);
NetConfig net_config_from_json(const Json& j);

Json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const Json& j);

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const EvalConfig& c);
EvalConfig eval_config_from_json(const Json& j);

Json to_json(const ClusterConfig& c);
ClusterConfig cluster_config_from_json(const Json& j);

Json to_json(const OracleConfig& c);
OracleConfig oracle_config_from_json(const Json& j);

Json to_json(const Rle& r);
Rle rle_from_json(const Json& j);

Json parse_json_file(const std::filesystem::path& path);

}  // namespace amodal
