#include "mfls/levelset/checkpoint.hpp"

#include <fstream>

#include "mfls/util/error.hpp"

namespace mfls::levelset {

using nlohmann::json;

namespace {

json network_to_json(const nn::PolicyNetwork& net, const char* role, std::size_t step) {
  json layers = json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weights(l);
    const std::size_t in = net.layer_in(l), out = net.layer_out(l);
    json rows = json::array();
    for (std::size_t r = 0; r < out; ++r) rows.push_back(std::vector<double>(w.begin() + r * in, w.begin() + (r + 1) * in));
    const auto b = net.biases(l);
    layers.push_back({{"weights", rows}, {"biases", std::vector<double>(b.begin(), b.end())}});
  }
  json transform{{"kind", net.output_transform().is_box() ? "box" : "identity"}};
  if (net.output_transform().is_box()) {
    transform["lo"] = net.output_transform().lo();
    transform["hi"] = net.output_transform().hi();
  }
  return {{"role", role},
          {"step", step},
          {"input_dim", net.input_dim()},
          {"hidden", net.hidden()},
          {"output_dim", net.output_dim()},
          {"activation", net.activation() == nn::Activation::tanh ? "tanh" : "identity"},
          {"transform", transform},
          {"input_offset", net.input_offset()},
          {"input_scale", net.input_scale()},
          {"layers", layers}};
}

nn::PolicyNetwork network_from_json(const json& j) {
  const std::string act = j.at("activation").get<std::string>();
  if (act != "tanh" && act != "identity") throw ConfigError("checkpoint: unknown activation " + act);
  const auto& tj = j.at("transform");
  nn::OutputTransform transform = tj.at("kind").get<std::string>() == "box"
                                      ? nn::OutputTransform::box(tj.at("lo").get<std::vector<double>>(),
                                                                 tj.at("hi").get<std::vector<double>>())
                                      : nn::OutputTransform::identity();
  nn::PolicyNetwork net(j.at("input_dim").get<std::size_t>(), j.at("hidden").get<std::vector<std::size_t>>(),
                        j.at("output_dim").get<std::size_t>(),
                        act == "tanh" ? nn::Activation::tanh : nn::Activation::identity, transform);
  net.input_offset() = j.at("input_offset").get<std::vector<double>>();
  net.input_scale() = j.at("input_scale").get<std::vector<double>>();
  if (net.input_offset().size() != net.input_dim() || net.input_scale().size() != net.input_dim())
    throw ConfigError("checkpoint: input standardization has the wrong length");
  const auto& layers = j.at("layers");
  if (layers.size() != net.num_layers()) throw ConfigError("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto rows = layers[l].at("weights").get<std::vector<std::vector<double>>>();
    const auto bias = layers[l].at("biases").get<std::vector<double>>();
    const std::size_t in = net.layer_in(l), out = net.layer_out(l);
    if (rows.size() != out || bias.size() != out) throw ConfigError("checkpoint: layer shape mismatch");
    auto w = net.weights(l);
    for (std::size_t r = 0; r < out; ++r) {
      if (rows[r].size() != in) throw ConfigError("checkpoint: layer shape mismatch");
      std::copy(rows[r].begin(), rows[r].end(), w.begin() + r * in);
    }
    std::copy(bias.begin(), bias.end(), net.biases(l).begin());
  }
  if (!net.parameters_finite()) throw ConfigError("checkpoint: non-finite parameters");
  return net;
}

}  // namespace

json policies_to_json(const PolicySet& set, const json& metadata) {
  json nets = json::array();
  for (std::size_t i = 0; i < set.alpha.size(); ++i) nets.push_back(network_to_json(set.alpha[i], "alpha", i));
  for (std::size_t i = 0; i < set.beta.size(); ++i) nets.push_back(network_to_json(set.beta[i], "beta", i));
  return {{"format", "mfls-policy"}, {"version", 1}, {"metadata", metadata}, {"networks", nets}};
}

PolicySet policies_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "mfls-policy") throw ConfigError("checkpoint: unknown format");
    if (j.at("version").get<int>() != 1) throw ConfigError("checkpoint: unsupported version");
    PolicySet set;
    for (const auto& nj : j.at("networks")) {
      const std::string role = nj.at("role").get<std::string>();
      auto& dst = role == "alpha" ? set.alpha : role == "beta" ? set.beta : throw ConfigError("checkpoint: unknown role " + role);
      if (nj.at("step").get<std::size_t>() != dst.size()) throw ConfigError("checkpoint: networks out of order");
      dst.push_back(network_from_json(nj));
    }
    if (set.alpha.empty()) throw ConfigError("checkpoint: no control networks");
    if (!set.beta.empty() && set.beta.size() != set.alpha.size())
      throw ConfigError("checkpoint: martingale network count differs from control network count");
    return set;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const PolicySet& set, const json& metadata) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write checkpoint " + path);
  os << policies_to_json(set, metadata).dump() << '\n';
}

PolicySet load_checkpoint(const std::string& path, json* metadata) {
  std::ifstream is(path);
  if (!is) throw ConfigError("checkpoint not found: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint " + path + ": " + e.what());
  }
  auto set = policies_from_json(j);
  if (metadata) *metadata = j.value("metadata", json::object());
  return set;
}

}  // namespace mfls::levelset
