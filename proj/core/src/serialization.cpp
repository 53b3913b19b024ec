#include "amodal/serialization.hpp"

#include <fstream>
#include <set>
#include <string>

#include "amodal/error.hpp"

namespace amodal {

namespace {

class Reader {
 public:
  Reader(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j.is_object()) throw Error(ErrorKind::kFormat, what_ + ": expected a JSON object");
  }

  template <typename T>
  bool get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return false;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, what_ + ": field '" + key + "': " + e.what());
    }
    return true;
  }

  const Json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw Error(ErrorKind::kFormat, what_ + ": unknown field '" + item.key() + "'");
  }

  const std::string& what() const { return what_; }

 private:
  const Json& j_;
  std::string what_;
  std::set<std::string> seen_;
};

std::vector<ShapeKind> parse_classes(Reader& r) {
  std::vector<std::string> names;
  std::vector<ShapeKind> out;
  if (!r.get("classes", names)) return {};
  for (const auto& n : names) out.push_back(parse_shape_kind(n));
  return out;
}

Json class_names(const std::vector<ShapeKind>& classes) {
  Json a = Json::array();
  for (auto k : classes) a.push_back(shape_kind_name(k));
  return a;
}

}  // namespace

Json to_json(const SceneConfig& c) {
  return Json{{"classes", class_names(c.classes)},
              {"instances_per_class", c.instances_per_class},
              {"canvas_size", c.canvas_size},
              {"label_size", c.label_size},
              {"shape_scale", c.shape_scale},
              {"outline_width", c.outline_width},
              {"min_visible_pixels", c.min_visible_pixels},
              {"max_resample_rounds", c.max_resample_rounds},
              {"seed", c.seed}};
}

SceneConfig scene_config_from_json(const Json& j) {
  SceneConfig c;
  Reader r(j, "scene config");
  auto classes = parse_classes(r);
  if (!classes.empty()) c.classes = classes;
  r.get("instances_per_class", c.instances_per_class);
  r.get("canvas_size", c.canvas_size);
  r.get("label_size", c.label_size);
  r.get("shape_scale", c.shape_scale);
  r.get("outline_width", c.outline_width);
  r.get("min_visible_pixels", c.min_visible_pixels);
  r.get("max_resample_rounds", c.max_resample_rounds);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const Scene& s) {
  Json inst = Json::array();
  for (const auto& i : s.instances)
    inst.push_back({{"instance_id", i.instance_id},
                    {"class_id", i.class_id},
                    {"cx", i.cx},
                    {"cy", i.cy},
                    {"orientation", i.orientation},
                    {"depth_rank", i.depth_rank}});
  return Json{{"classes", class_names(s.classes)},
              {"shape_scale", s.shape_scale},
              {"instances", inst},
              {"depth_order", s.depth_order()}};
}

Scene scene_from_json(const Json& j) {
  Scene s;
  Reader r(j, "scene");
  s.classes = parse_classes(r);
  r.get("shape_scale", s.shape_scale);
  std::vector<int> order;
  const bool has_order = r.get("depth_order", order);
  const Json* inst = r.child("instances");
  r.finish();
  if (!inst || !inst->is_array()) throw Error(ErrorKind::kFormat, "scene: missing instances array");
  for (const auto& e : *inst) {
    Reader ir(e, "scene instance");
    ShapeInstance i;
    ir.get("instance_id", i.instance_id);
    ir.get("class_id", i.class_id);
    ir.get("cx", i.cx);
    ir.get("cy", i.cy);
    ir.get("orientation", i.orientation);
    ir.get("depth_rank", i.depth_rank);
    ir.finish();
    if (i.instance_id != s.size())
      throw Error(ErrorKind::kFormat, "scene: instance ids must be 0..N-1 in order");
    if (i.class_id < 0 || i.class_id >= static_cast<int>(s.classes.size()))
      throw Error(ErrorKind::kFormat, "scene: class_id out of range");
    s.instances.push_back(i);
  }
  std::vector<int> ranks;
  for (const auto& i : s.instances) ranks.push_back(i.depth_rank);
  std::sort(ranks.begin(), ranks.end());
  for (int k = 0; k < s.size(); ++k)
    if (ranks[k] != k) throw Error(ErrorKind::kFormat, "scene: depth ranks must be a permutation");
  if (has_order && order != s.depth_order())
    throw Error(ErrorKind::kFormat, "scene: depth_order disagrees with depth ranks");
  return s;
}

Json to_json(const NetConfig& c) {
  Json trunk = Json::array();
  for (const auto& l : c.trunk) trunk.push_back({{"width", l.width}, {"dilation", l.dilation}});
  return Json{{"num_classes", c.num_classes},       {"embed_dim", c.embed_dim},
              {"input_size", c.input_size},         {"output_size", c.output_size},
              {"trunk", trunk},                     {"kernel", c.kernel},
              {"head_hidden", c.head_hidden},       {"head_width_factor", c.head_width_factor},
              {"coord_channels", c.coord_channels}};
}

NetConfig net_config_from_json(const Json& j) {
  NetConfig c;
  Reader r(j, "net config");
  r.get("num_classes", c.num_classes);
  r.get("embed_dim", c.embed_dim);
  r.get("input_size", c.input_size);
  r.get("output_size", c.output_size);
  r.get("kernel", c.kernel);
  r.get("head_hidden", c.head_hidden);
  r.get("head_width_factor", c.head_width_factor);
  r.get("coord_channels", c.coord_channels);
  if (const Json* t = r.child("trunk")) {
    if (!t->is_array()) throw Error(ErrorKind::kFormat, "net config: trunk must be an array");
    c.trunk.clear();
    for (const auto& e : *t) {
      TrunkLayer l;
      if (e.is_number_integer()) {
        l.width = e.get<int>();
      } else {
        Reader lr(e, "net config trunk layer");
        lr.get("width", l.width);
        lr.get("dilation", l.dilation);
        lr.finish();
      }
      c.trunk.push_back(l);
    }
  }
  r.finish();
  c.validate();
  return c;
}

Json to_json(const LossConfig& c) {
  return Json{{"d_var", c.d_var}, {"d_dst", c.d_dst}, {"alpha", c.alpha},
              {"beta", c.beta},   {"gamma", c.gamma}, {"semantic_weight", c.semantic_weight}};
}

LossConfig loss_config_from_json(const Json& j) {
  LossConfig c;
  Reader r(j, "loss config");
  r.get("d_var", c.d_var);
  r.get("d_dst", c.d_dst);
  r.get("alpha", c.alpha);
  r.get("beta", c.beta);
  r.get("gamma", c.gamma);
  r.get("semantic_weight", c.semantic_weight);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
              {"epochs", c.epochs},               {"samples_per_epoch", c.samples_per_epoch},
              {"beta1", c.beta1},                 {"beta2", c.beta2},
              {"epsilon", c.epsilon},             {"seed", c.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  Reader r(j, "train config");
  r.get("learning_rate", c.learning_rate);
  r.get("batch_size", c.batch_size);
  r.get("epochs", c.epochs);
  r.get("samples_per_epoch", c.samples_per_epoch);
  r.get("beta1", c.beta1);
  r.get("beta2", c.beta2);
  r.get("epsilon", c.epsilon);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const EvalConfig& c) {
  return Json{{"iou_thresholds", c.iou_thresholds},
              {"max_detections", c.max_detections},
              {"recall_points", c.recall_points},
              {"occlusion_partial_max", c.occlusion.partial_max},
              {"visible_iou", c.visible_iou}};
}

EvalConfig eval_config_from_json(const Json& j) {
  EvalConfig c;
  Reader r(j, "eval config");
  r.get("iou_thresholds", c.iou_thresholds);
  r.get("max_detections", c.max_detections);
  r.get("recall_points", c.recall_points);
  r.get("occlusion_partial_max", c.occlusion.partial_max);
  r.get("visible_iou", c.visible_iou);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const ClusterConfig& c) {
  return Json{{"bandwidth", c.bandwidth},
              {"max_iterations", c.max_iterations},
              {"min_cluster_pixels", c.min_cluster_pixels},
              {"seed", c.seed},
              {"per_class", c.per_class},
              {"foreground_first", c.foreground_first}};
}

ClusterConfig cluster_config_from_json(const Json& j) {
  ClusterConfig c;
  Reader r(j, "cluster config");
  r.get("bandwidth", c.bandwidth);
  r.get("max_iterations", c.max_iterations);
  r.get("min_cluster_pixels", c.min_cluster_pixels);
  r.get("seed", c.seed);
  r.get("per_class", c.per_class);
  r.get("foreground_first", c.foreground_first);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const OracleConfig& c) {
  return Json{{"num_classes", c.num_classes}, {"embed_dim", c.embed_dim},
              {"logit_margin", c.logit_margin}, {"spacing", c.spacing},
              {"radius", c.radius},           {"compress", c.compress},
              {"sigma", c.sigma},             {"normalize_noise", c.normalize_noise},
              {"seed", c.seed}};
}

OracleConfig oracle_config_from_json(const Json& j) {
  OracleConfig c;
  Reader r(j, "oracle config");
  r.get("num_classes", c.num_classes);
  r.get("embed_dim", c.embed_dim);
  r.get("logit_margin", c.logit_margin);
  r.get("spacing", c.spacing);
  r.get("radius", c.radius);
  r.get("compress", c.compress);
  r.get("sigma", c.sigma);
  r.get("normalize_noise", c.normalize_noise);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const Rle& rle) {
  return Json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

Rle rle_from_json(const Json& j) {
  Rle rle;
  Reader r(j, "rle mask");
  std::vector<int> size;
  r.get("size", size);
  r.get("counts", rle.counts);
  r.finish();
  if (size.size() != 2) throw Error(ErrorKind::kFormat, "rle mask: size must be [height, width]");
  rle.height = size[0];
  rle.width = size[1];
  return rle;
}

Json parse_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

}  // namespace amodal
