#include <json.hpp>

#include "flim/encoder.hpp"
#include "flim/error.hpp"

namespace flim {

namespace {

using nlohmann::json;

template <typename T>
T field(const json& obj, const char* key, T fallback, bool required) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    require(!required, ErrorCode::malformed_header, std::string("missing field '") + key + "'");
    return fallback;
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::malformed_header, std::string("field '") + key + "' has the wrong type");
  }
}

LayerSpec layer_from_json(const json& j) {
  require(j.is_object(), ErrorCode::malformed_header, "layer entry must be an object");
  LayerSpec s;
  s.kernel_size = field<int>(j, "kernel_size", 3, true);
  s.dilations = field<std::vector<int>>(j, "dilations", {1}, false);
  s.n_kernels = field<int>(j, "n_kernels", 0, true);
  s.per_marker = field<int>(j, "per_marker", 5, false);
  const auto pool = field<std::string>(j, "pool", "max", false);
  require(pool == "max" || pool == "avg", ErrorCode::malformed_header,
          "pool must be \"max\" or \"avg\"");
  s.pool_kind = pool == "max" ? PoolKind::max : PoolKind::avg;
  s.pool_size = field<int>(j, "pool_size", 1, false);
  s.pool_stride = field<int>(j, "pool_stride", 1, false);
  const auto mode = field<std::string>(j, "mode", "regular", false);
  require(mode == "regular" || mode == "separable", ErrorCode::malformed_header,
          "mode must be \"regular\" or \"separable\"");
  s.mode = mode == "regular" ? ConvMode::regular : ConvMode::separable;
  return s;
}

json layer_to_json(const LayerSpec& s) {
  return json{{"kernel_size", s.kernel_size},
              {"dilations", s.dilations},
              {"n_kernels", s.n_kernels},
              {"per_marker", s.per_marker},
              {"pool", s.pool_kind == PoolKind::max ? "max" : "avg"},
              {"pool_size", s.pool_size},
              {"pool_stride", s.pool_stride},
              {"mode", s.mode == ConvMode::regular ? "regular" : "separable"}};
}

}  // namespace

LayerSpec parse_layer_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    fail(ErrorCode::malformed_header, std::string("layer spec is not valid JSON: ") + e.what());
  }
  return layer_from_json(doc);
}

std::string layer_spec_to_json(const LayerSpec& spec) { return layer_to_json(spec).dump(); }

ArchitectureSpec parse_architecture(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    fail(ErrorCode::malformed_header, std::string("architecture is not valid JSON: ") + e.what());
  }
  require(doc.is_object(), ErrorCode::malformed_header, "architecture must be a JSON object");
  ArchitectureSpec arch;
  arch.input_channels = field<int>(doc, "input_channels", 1, false);
  const auto it = doc.find("layers");
  require(it != doc.end() && it->is_array(), ErrorCode::malformed_header,
          "architecture needs a \"layers\" array");
  for (const json& l : *it) arch.layers.push_back(layer_from_json(l));
  try {
    arch.validate();
  } catch (const Error& e) {
    fail(ErrorCode::malformed_header, e.what());
  }
  return arch;
}

std::string architecture_to_json(const ArchitectureSpec& arch) {
  json layers = json::array();
  for (const LayerSpec& l : arch.layers) layers.push_back(layer_to_json(l));
  return json{{"input_channels", arch.input_channels}, {"layers", layers}}.dump(2);
}

namespace presets {

namespace {

LayerSpec layer(int m, int per_marker, PoolKind kind, int pool_size, int stride, int dilation,
                ConvMode mode, bool multi_dilation) {
  LayerSpec s;
  s.kernel_size = 3;
  s.dilations = multi_dilation ? std::vector<int>{1, 2, 3} : std::vector<int>{dilation};
  s.n_kernels = m;
  s.per_marker = per_marker;
  s.pool_kind = kind;
  s.pool_size = pool_size;
  s.pool_stride = stride;
  s.mode = mode;
  return s;
}

}  // namespace

ArchitectureSpec schistosoma(ConvMode mode, bool multi_dilation) {
  ArchitectureSpec a;
  a.input_channels = 3;
  a.layers = {layer(32, 5, PoolKind::max, 5, 1, 1, mode, multi_dilation),
              layer(32, 5, PoolKind::avg, 5, 1, 1, mode, multi_dilation),
              layer(8, 5, PoolKind::max, 7, 1, 1, mode, multi_dilation),
              layer(8, 5, PoolKind::max, 5, 1, 7, mode, multi_dilation)};
  return a;
}

ArchitectureSpec brain_tumor(ConvMode mode, bool multi_dilation) {
  ArchitectureSpec a;
  a.input_channels = 1;
  a.layers = {layer(16, 4, PoolKind::max, 3, 2, 1, mode, multi_dilation),
              layer(32, 4, PoolKind::max, 3, 2, 1, mode, multi_dilation),
              layer(64, 4, PoolKind::max, 3, 2, 1, mode, multi_dilation)};
  return a;
}

}  // namespace presets

}  // namespace flim
