#include "semctx/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace semctx {

using ordered_json = nlohmann::ordered_json;

std::string serialize_model(const Model& model) {
  ordered_json j;
  j["format"] = "semctx-model";
  j["version"] = 1;
  j["architecture"] = model.architecture();
  j["input_size"] = model.input_size();
  j["head_label_space"] = label_space_name(model.head_label_space());
  j["head_dim"] = model.head_dim();
  j["input_mean"] = model.input_mean;
  j["trained"] = model.trained;
  j["hierarchy_id"] = model.hierarchy_id;
  ordered_json layers = ordered_json::array();
  for (const auto& l : model.layers()) {
    ordered_json e;
    e["kind"] = describe(l.op);
    e["trainable"] = l.trainable;
    const auto params = parameters(l.op);
    if (!params.empty()) {
      e["weight"] = params[0]->value;
      e["bias"] = params[1]->value;
    }
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  if (model.has_hierarchy()) {
    const auto& w = model.aggregation();
    ordered_json a;
    a["rows"] = w.weights.rows();
    a["cols"] = w.weights.cols();
    a["trainable"] = w.trainable;
    a["parents"] = w.parents;
    a["weights"] = w.weights.data();
    j["aggregation"] = std::move(a);
  }
  return j.dump() + "\n";
}

Model parse_model(const std::string& text) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("format") != "semctx-model") throw DataError("not a model checkpoint");
    if (j.at("version") != 1) throw DataError("unsupported checkpoint version");
    const auto arch = j.at("architecture").get<std::string>();
    const int input_size = j.at("input_size").get<int>();
    int feature_dim = 0;
    auto layers = build_backbone(arch, input_size, &feature_dim);
    layers.push_back({Dense(feature_dim, j.at("head_dim").get<int>()), true});

    const auto& stored = j.at("layers");
    if (stored.size() != layers.size()) throw DataError("checkpoint layer count does not match its architecture");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& e = stored[i];
      if (e.at("kind").get<std::string>() != describe(layers[i].op)) {
        throw DataError("checkpoint layer " + std::to_string(i) + " does not match its architecture");
      }
      layers[i].trainable = e.at("trainable").get<bool>();
      auto params = parameters(layers[i].op);
      if (params.empty()) continue;
      auto weight = e.at("weight").get<std::vector<double>>();
      auto bias = e.at("bias").get<std::vector<double>>();
      if (weight.size() != params[0]->value.size() || bias.size() != params[1]->value.size()) {
        throw DataError("checkpoint tensor size mismatch in layer " + std::to_string(i));
      }
      params[0]->value = std::move(weight);
      params[1]->value = std::move(bias);
    }
    Model model = model_from_parts(arch, input_size, std::move(layers),
                                   parse_label_space(j.at("head_label_space").get<std::string>()));
    model.input_mean = j.at("input_mean").get<Rgb>();
    model.trained = j.at("trained").get<bool>();
    model.hierarchy_id = j.at("hierarchy_id").get<std::string>();
    if (j.contains("aggregation")) {
      const auto& a = j.at("aggregation");
      AggregationMatrix w;
      w.weights = Matrix(a.at("rows").get<int>(), a.at("cols").get<int>());
      auto values = a.at("weights").get<std::vector<double>>();
      if (values.size() != w.weights.data().size()) throw DataError("checkpoint aggregation size mismatch");
      w.weights.data() = std::move(values);
      w.parents = a.at("parents").get<std::vector<int>>();
      const bool trainable = a.at("trainable").get<bool>();
      model.add_hierarchy_head(std::move(w));
      model.aggregation().trainable = trainable;
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << serialize_model(model);
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace semctx
