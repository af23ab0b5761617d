#include "corelw/config.hpp"

#include <fstream>
#include <sstream>

#include "corelw/error.hpp"

namespace corelw {
namespace {

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + value + "'");
  }
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "lowercase") lowercase = parse_bool(key, value);
  else if (key == "strip_punctuation") strip_punctuation = parse_bool(key, value);
  else if (key == "remove_stopwords") remove_stopwords = parse_bool(key, value);
  else if (key == "stem") stem = parse_bool(key, value);
  else if (key == "stopwords_path") stopwords_path = value;
  else if (key == "max_tokens") max_tokens = static_cast<std::size_t>(parse_int(key, value));
  else if (key == "corpus_format") corpus_format = value;
  else if (key == "num_levels") num_levels = static_cast<int>(parse_int(key, value));
  else if (key == "embedding_path") embedding_path = value;
  else if (key == "embedding_dim") embedding_dim = static_cast<int>(parse_int(key, value));
  else if (key == "sif_a") sif_a = parse_double(key, value);
  else if (key == "oov_seed") oov_seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "encoder") encoder = value;
  else if (key == "d_h") d_h = static_cast<int>(parse_int(key, value));
  else if (key == "d_c") d_c = static_cast<int>(parse_int(key, value));
  else if (key == "window") window = static_cast<int>(parse_int(key, value));
  else if (key == "encoder_seed") encoder_seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "paper_exact_cell") paper_exact_cell = parse_bool(key, value);
  else if (key == "batch_norm") batch_norm = parse_bool(key, value);
  else if (key == "sinkhorn_epsilon_scale") sinkhorn_epsilon_scale = parse_double(key, value);
  else if (key == "sinkhorn_epsilon_abs") sinkhorn_epsilon_abs = parse_double(key, value);
  else if (key == "sinkhorn_max_iters") sinkhorn_max_iters = static_cast<int>(parse_int(key, value));
  else if (key == "sinkhorn_tolerance") sinkhorn_tolerance = parse_double(key, value);
  else if (key == "margin") margin = parse_double(key, value);
  else if (key == "learning_rate") learning_rate = parse_double(key, value);
  else if (key == "batch_size") batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "epochs") epochs = static_cast<int>(parse_int(key, value));
  else if (key == "triplets_per_anchor") triplets_per_anchor = static_cast<int>(parse_int(key, value));
  else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "adam_beta1") adam_beta1 = parse_double(key, value);
  else if (key == "adam_beta2") adam_beta2 = parse_double(key, value);
  else if (key == "adam_eps") adam_eps = parse_double(key, value);
  else if (key == "resample_each_epoch") resample_each_epoch = parse_bool(key, value);
  else if (key == "grad_clip") grad_clip = parse_bool(key, value);
  else if (key == "grad_clip_norm") grad_clip_norm = parse_double(key, value);
  else if (key == "knn_k") knn_k = static_cast<int>(parse_int(key, value));
  else if (key == "baseline_train_head") baseline_train_head = parse_bool(key, value);
  else if (key == "repeats") repeats = static_cast<int>(parse_int(key, value));
  else if (key == "train_fraction") train_fraction = parse_double(key, value);
  else if (key == "stratified") stratified = parse_bool(key, value);
  else if (key == "min_occurrences") min_occurrences = static_cast<int>(parse_int(key, value));
  else if (key == "threads") threads = static_cast<int>(parse_int(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key=value");
    }
    apply(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

PreprocessConfig RunConfig::preprocess_config(const std::set<std::string>& stopwords) const {
  PreprocessConfig cfg;
  cfg.lowercase = lowercase;
  cfg.strip_punctuation = strip_punctuation;
  cfg.remove_stopwords = remove_stopwords;
  cfg.stem = stem;
  cfg.stopword_list = stopwords;
  if (max_tokens > 0) cfg.max_tokens = max_tokens;
  return cfg;
}

EncoderConfig RunConfig::encoder_config() const {
  EncoderConfig cfg;
  cfg.kind = encoder_kind_from_string(encoder);
  cfg.d_w = embedding_dim;
  cfg.d_h = d_h;
  cfg.d_c = d_c;
  cfg.window = window;
  cfg.init_seed = encoder_seed;
  cfg.paper_exact_cell = paper_exact_cell;
  cfg.batch_norm = batch_norm;
  return cfg;
}

SinkhornSettings RunConfig::sinkhorn_settings() const {
  SinkhornSettings s;
  s.epsilon_scale = sinkhorn_epsilon_scale;
  if (sinkhorn_epsilon_abs > 0.0) s.epsilon_abs = sinkhorn_epsilon_abs;
  s.max_iters = sinkhorn_max_iters;
  s.tolerance = sinkhorn_tolerance;
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.margin = margin;
  cfg.learning_rate = learning_rate;
  cfg.batch_size = batch_size;
  cfg.epochs = epochs;
  cfg.triplets_per_anchor = triplets_per_anchor;
  cfg.seed = seed;
  cfg.adam_beta1 = adam_beta1;
  cfg.adam_beta2 = adam_beta2;
  cfg.adam_eps = adam_eps;
  cfg.resample_each_epoch = resample_each_epoch;
  cfg.grad_clip = grad_clip;
  cfg.grad_clip_norm = grad_clip_norm;
  return cfg;
}

SplitPlan RunConfig::split_plan() const {
  SplitPlan plan;
  plan.repeats = repeats;
  plan.train_fraction = train_fraction;
  plan.stratified = stratified;
  plan.seed = seed;
  return plan;
}

std::map<std::string, std::string> RunConfig::as_map() const {
  std::map<std::string, std::string> m;
  m["lowercase"] = lowercase ? "true" : "false";
  m["strip_punctuation"] = strip_punctuation ? "true" : "false";
  m["remove_stopwords"] = remove_stopwords ? "true" : "false";
  m["stem"] = stem ? "true" : "false";
  m["stopwords_path"] = stopwords_path;
  m["max_tokens"] = std::to_string(max_tokens);
  m["corpus_format"] = corpus_format;
  m["num_levels"] = std::to_string(num_levels);
  m["embedding_path"] = embedding_path;
  m["embedding_dim"] = std::to_string(embedding_dim);
  m["sif_a"] = fmt(sif_a);
  m["oov_seed"] = std::to_string(oov_seed);
  m["encoder"] = encoder;
  m["d_h"] = std::to_string(d_h);
  m["d_c"] = std::to_string(d_c);
  m["window"] = std::to_string(window);
  m["encoder_seed"] = std::to_string(encoder_seed);
  m["paper_exact_cell"] = paper_exact_cell ? "true" : "false";
  m["batch_norm"] = batch_norm ? "true" : "false";
  m["sinkhorn_epsilon_scale"] = fmt(sinkhorn_epsilon_scale);
  m["sinkhorn_epsilon_abs"] = fmt(sinkhorn_epsilon_abs);
  m["sinkhorn_max_iters"] = std::to_string(sinkhorn_max_iters);
  m["sinkhorn_tolerance"] = fmt(sinkhorn_tolerance);
  m["margin"] = fmt(margin);
  m["learning_rate"] = fmt(learning_rate);
  m["batch_size"] = std::to_string(batch_size);
  m["epochs"] = std::to_string(epochs);
  m["triplets_per_anchor"] = std::to_string(triplets_per_anchor);
  m["seed"] = std::to_string(seed);
  m["adam_beta1"] = fmt(adam_beta1);
  m["adam_beta2"] = fmt(adam_beta2);
  m["adam_eps"] = fmt(adam_eps);
  m["resample_each_epoch"] = resample_each_epoch ? "true" : "false";
  m["grad_clip"] = grad_clip ? "true" : "false";
  m["grad_clip_norm"] = fmt(grad_clip_norm);
  m["knn_k"] = std::to_string(knn_k);
  m["baseline_train_head"] = baseline_train_head ? "true" : "false";
  m["repeats"] = std::to_string(repeats);
  m["train_fraction"] = fmt(train_fraction);
  m["stratified"] = stratified ? "true" : "false";
  m["min_occurrences"] = std::to_string(min_occurrences);
  m["threads"] = std::to_string(threads);
  return m;
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : as_map()) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace corelw
