#include "corelw/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "corelw/error.hpp"

namespace corelw {

namespace {

using nlohmann::json;

json tensor_to_json(const TensorView& view) {
  json t;
  t["shape"] = view.shape;
  std::vector<double> data;
  data.reserve(view.size);
  if (view.shape.size() == 2) {
    const long rows = view.shape[0];
    const long cols = view.shape[1];
    // Eigen stores column-major; the file is row-major.
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) data.push_back(view.data[r + c * rows]);
    }
  } else {
    data.assign(view.data, view.data + view.size);
  }
  t["data"] = std::move(data);
  return t;
}

void tensor_from_json(const json& t, TensorView& view) {
  const auto shape = t.at("shape").get<std::vector<long>>();
  if (shape != view.shape) {
    throw LoadError("checkpoint tensor '" + view.name + "' has mismatched shape");
  }
  const auto data = t.at("data").get<std::vector<double>>();
  if (data.size() != view.size) {
    throw LoadError("checkpoint tensor '" + view.name + "' has mismatched size");
  }
  if (shape.size() == 2) {
    const long rows = shape[0];
    const long cols = shape[1];
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) view.data[r + c * rows] = data[r * cols + c];
    }
  } else {
    std::copy(data.begin(), data.end(), view.data);
  }
}

std::vector<double> vec_to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params) {
  json root;
  root["format"] = "corelw-checkpoint";
  root["version"] = 1;
  json cfg;
  cfg["kind"] = encoder_kind_name(params.config.kind);
  cfg["d_w"] = params.config.d_w;
  cfg["d_h"] = params.config.d_h;
  cfg["d_c"] = params.config.d_c;
  cfg["window"] = params.config.window;
  cfg["init_seed"] = params.config.init_seed;
  cfg["paper_exact_cell"] = params.config.paper_exact_cell;
  cfg["batch_norm"] = params.config.batch_norm;
  root["encoder"] = cfg;

  json tensors;
  auto views = tensor_views(const_cast<EncoderParams&>(params));
  for (const auto& view : views) tensors[view.name] = tensor_to_json(view);
  root["tensors"] = std::move(tensors);

  if (params.bn) {
    json bn;
    bn["running_mean"] = vec_to_std(params.bn->running_mean);
    bn["running_var"] = vec_to_std(params.bn->running_var);
    bn["momentum"] = params.bn->momentum;
    bn["eps"] = params.bn->eps;
    root["batch_norm_state"] = std::move(bn);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write checkpoint: " + path.string());
  out << root.dump(2) << "\n";
  if (!out) throw LoadError("failed writing checkpoint: " + path.string());
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint: " + path.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": invalid checkpoint JSON: " + std::string(e.what()));
  }
  try {
    if (root.at("format").get<std::string>() != "corelw-checkpoint") {
      throw LoadError(path.string() + ": not a corelw checkpoint");
    }
    const auto& cfg = root.at("encoder");
    EncoderConfig config;
    config.kind = encoder_kind_from_string(cfg.at("kind").get<std::string>());
    config.d_w = cfg.at("d_w").get<int>();
    config.d_h = cfg.at("d_h").get<int>();
    config.d_c = cfg.at("d_c").get<int>();
    config.window = cfg.at("window").get<int>();
    config.init_seed = cfg.at("init_seed").get<std::uint64_t>();
    config.paper_exact_cell = cfg.at("paper_exact_cell").get<bool>();
    config.batch_norm = cfg.at("batch_norm").get<bool>();

    EncoderParams params = init_encoder(config);
    auto views = tensor_views(params);
    const auto& tensors = root.at("tensors");
    for (auto& view : views) {
      if (!tensors.contains(view.name)) {
        throw LoadError(path.string() + ": checkpoint missing tensor '" + view.name + "'");
      }
      tensor_from_json(tensors.at(view.name), view);
    }
    if (params.bn) {
      const auto& bn = root.at("batch_norm_state");
      params.bn->running_mean = vec_from_std(bn.at("running_mean").get<std::vector<double>>());
      params.bn->running_var = vec_from_std(bn.at("running_var").get<std::vector<double>>());
      params.bn->momentum = bn.at("momentum").get<double>();
      params.bn->eps = bn.at("eps").get<double>();
    }
    return params;
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": malformed checkpoint: " + std::string(e.what()));
  }
}

}  // namespace corelw
