#include "wdtcn/checkpoint.h"

#include <fstream>
#include <string>

#include "wdtcn/wav.h"

namespace wdtcn {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return json{{"variant", to_string(c.variant)},
              {"X", c.x},
              {"R", c.r},
              {"N", c.n},
              {"B", c.b},
              {"H", c.h},
              {"P", c.p},
              {"L_BL", c.l_bl},
              {"Q", c.q}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    c.x = j.value("X", c.x);
    c.r = j.value("R", c.r);
    c.n = j.value("N", c.n);
    c.b = j.value("B", c.b);
    c.h = j.value("H", c.h);
    c.p = j.value("P", c.p);
    c.l_bl = j.value("L_BL", c.l_bl);
    c.q = j.value("Q", c.q);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("model config: ") + ex.what());
  }
  c.validate();
  return c;
}

json model_to_json(const Model& model) {
  json params = json::object();
  for (const auto& p : model.parameters()) {
    params[p.name] = json{{"shape", p.value.shape()}, {"data", p.value.values()}};
  }
  return json{{"magic", kCheckpointMagic},
              {"version", kCheckpointVersion},
              {"config", config_to_json(model.config())},
              {"params", std::move(params)}};
}

Model model_from_json(const json& j) {
  if (!j.is_object() || j.value("magic", std::string()) != kCheckpointMagic) {
    throw IoError("checkpoint: missing or wrong magic string");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " +
                  std::to_string(j.value("version", 0)));
  }
  const ModelConfig config = config_from_json(j.at("config"));
  const json& params = j.at("params");
  std::vector<Model::Parameter> tensors;
  for (const auto& spec : parameter_layout(config)) {
    if (!params.contains(spec.name)) {
      throw IoError("checkpoint: missing parameter " + spec.name);
    }
    const json& entry = params.at(spec.name);
    tensors.push_back({spec.name, Tensor(entry.at("shape").get<Shape>(),
                                         entry.at("data").get<std::vector<double>>())});
  }
  return Model(config, std::move(tensors));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw IoError(path.string() + ": " + ex.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot create " + path.string());
  os << j.dump();
  if (!os) throw IoError("write failed for " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_json_file(path, model_to_json(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return model_from_json(read_json_file(path));
}

}  // namespace wdtcn
