#include "lumi/config.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"
#include "lumi/util.hpp"

namespace lumi {

using nlohmann::json;

double ConfigValue::as_real() const {
  if (kind == Kind::real) return real;
  if (kind == Kind::integer) return static_cast<double>(integer);
  fail(ErrorKind::config, "config value is not numeric");
}

namespace {

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

ConfigValue parse_scalar(const std::string& raw, std::size_t line_number);

ConfigValue parse_value(const std::string& raw, std::size_t line_number) {
  const std::string text = trim(raw);
  if (text.empty())
    fail(ErrorKind::parse, "config line " + std::to_string(line_number) + ": empty value");
  if (text.front() == '[') {
    if (text.back() != ']')
      fail(ErrorKind::parse, "config line " + std::to_string(line_number) + ": unclosed array");
    ConfigValue value;
    value.kind = ConfigValue::Kind::array;
    const std::string inner = trim(text.substr(1, text.size() - 2));
    if (inner.empty()) return value;
    std::string current;
    bool in_string = false;
    for (char c : inner) {
      if (c == '"') in_string = !in_string;
      if (c == ',' && !in_string) {
        value.items.push_back(parse_scalar(trim(current), line_number));
        current.clear();
      } else {
        current.push_back(c);
      }
    }
    value.items.push_back(parse_scalar(trim(current), line_number));
    return value;
  }
  return parse_scalar(text, line_number);
}

ConfigValue parse_scalar(const std::string& text, std::size_t line_number) {
  ConfigValue value;
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    value.kind = ConfigValue::Kind::string;
    std::string out;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
      if (text[i] == '\\' && i + 2 < text.size()) {
        ++i;
        out.push_back(text[i] == 'n' ? '\n' : text[i] == 't' ? '\t' : text[i]);
      } else {
        out.push_back(text[i]);
      }
    }
    value.str = out;
    return value;
  }
  if (text == "true" || text == "false") {
    value.kind = ConfigValue::Kind::boolean;
    value.boolean = text == "true";
    return value;
  }
  const bool looks_real = text.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t used = 0;
    if (looks_real) {
      value.kind = ConfigValue::Kind::real;
      value.real = std::stod(text, &used);
    } else {
      value.kind = ConfigValue::Kind::integer;
      value.integer = std::stoll(text, &used);
    }
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    fail(ErrorKind::parse,
         "config line " + std::to_string(line_number) + ": cannot parse value '" + text + "'");
  }
  return value;
}

}  // namespace

std::map<std::string, ConfigValue> parse_config_text(const std::string& text) {
  std::map<std::string, ConfigValue> table;
  std::string section;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string line = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    pos = end == std::string::npos ? text.size() + 1 : end + 1;
    ++line_number;

    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(ErrorKind::parse,
             "config line " + std::to_string(line_number) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        fail(ErrorKind::parse, "config line " + std::to_string(line_number) + ": empty section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::parse,
           "config line " + std::to_string(line_number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      fail(ErrorKind::parse, "config line " + std::to_string(line_number) + ": empty key");
    const std::string full_key = section.empty() ? key : section + "." + key;
    table[full_key] = parse_value(line.substr(eq + 1), line_number);
  }
  return table;
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  cfg.loss.epsilon_alpha = 0.01;
  cfg.augment.temperature = 0.7;  // tuned run default; the type default is 0.8
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  RunConfig cfg = defaults();
  cfg.apply(parse_config_text(read_file(path)));
  return cfg;
}

namespace {

template <typename T>
void take_int(const std::map<std::string, ConfigValue>& table, const std::string& key, T* out) {
  auto it = table.find(key);
  if (it == table.end()) return;
  if (it->second.kind != ConfigValue::Kind::integer)
    fail(ErrorKind::config, "config key " + key + " must be an integer");
  *out = static_cast<T>(it->second.integer);
}

void take_real(const std::map<std::string, ConfigValue>& table, const std::string& key,
               double* out) {
  auto it = table.find(key);
  if (it == table.end()) return;
  *out = it->second.as_real();
}

void take_bool(const std::map<std::string, ConfigValue>& table, const std::string& key,
               bool* out) {
  auto it = table.find(key);
  if (it == table.end()) return;
  if (it->second.kind != ConfigValue::Kind::boolean)
    fail(ErrorKind::config, "config key " + key + " must be a boolean");
  *out = it->second.boolean;
}

void take_string(const std::map<std::string, ConfigValue>& table, const std::string& key,
                 std::string* out) {
  auto it = table.find(key);
  if (it == table.end()) return;
  if (it->second.kind != ConfigValue::Kind::string)
    fail(ErrorKind::config, "config key " + key + " must be a string");
  *out = it->second.str;
}

}  // namespace

void RunConfig::apply(const std::map<std::string, ConfigValue>& table) {
  take_string(table, "corpus.train", &corpus_path);
  take_int(table, "segmentation.tail_max", &tail_max);
  take_int(table, "segmentation.body_max", &body_max);
  take_bool(table, "segmentation.quartile", &quartile);

  take_int(table, "embed.dim", &embed_dim);
  take_string(table, "embed.embedder", &embedder);
  take_string(table, "embed.remote_url", &remote_embed_url);
  take_string(table, "embed.remote_model", &remote_embed_model);
  take_string(table, "embed.lexicon", &lexicon_path);

  take_real(table, "loss.alpha", &loss.alpha);
  take_real(table, "loss.gamma", &loss.gamma);
  take_real(table, "loss.beta", &loss.beta);
  take_real(table, "loss.k", &loss.k);
  take_real(table, "loss.epsilon", &loss.epsilon);
  if (auto it = table.find("loss.epsilon_alpha"); it != table.end())
    loss.epsilon_alpha = it->second.as_real();
  take_real(table, "loss.alpha_min", &loss.alpha_min);
  take_real(table, "loss.alpha_max", &loss.alpha_max);
  take_real(table, "loss.gamma_min", &loss.gamma_min);
  take_real(table, "loss.gamma_max", &loss.gamma_max);
  take_int(table, "loss.theta_min", &loss.theta_min);
  take_int(table, "loss.theta_max", &loss.theta_max);
  take_bool(table, "loss.adaptive", &loss.adaptive);
  take_bool(table, "loss.use_class_weights", &loss.use_class_weights);
  take_bool(table, "loss.use_sample_weights", &loss.use_sample_weights);
  if (auto it = table.find("loss.mask_direction"); it != table.end())
    loss.mask_direction = mask_direction_from_name(it->second.str);

  take_real(table, "prototype.w_sem", &weights.sem);
  take_real(table, "prototype.w_emo", &weights.emo);
  take_real(table, "prototype.w_mov", &weights.mov);
  take_real(table, "prototype.w_int", &weights.interaction);
  take_real(table, "prototype.steepness", &weights.steepness);
  take_bool(table, "prototype.normalize_mov", &weights.normalize_mov);
  take_int(table, "prototype.K", &support_k);
  take_string(table, "prototype.strategy", &prototype_strategy);

  take_real(table, "augment.temperature", &augment.temperature);
  take_int(table, "augment.tail_count_min", &augment.tail_count_min);
  take_int(table, "augment.tail_count_max", &augment.tail_count_max);
  take_int(table, "augment.body_count_min", &augment.body_count_min);
  take_int(table, "augment.body_count_max", &augment.body_count_max);
  take_real(table, "augment.filter_threshold", &augment.filter_threshold);
  take_int(table, "augment.judge_count", &augment.judge_count);
  take_int(table, "augment.accept_min", &augment.accept_min);
  take_int(table, "augment.review_min", &augment.review_min);
  take_real(table, "augment.rho", &augment.rho);
  take_int(table, "augment.max_in_flight", &augment.max_in_flight);
  take_int(table, "augment.retry_backoff_ms", &augment.retry_backoff_ms);
  take_string(table, "augment.chat_url", &chat_url);
  take_string(table, "augment.chat_model", &chat_model);

  if (auto it = table.find("eval.k"); it != table.end()) {
    if (it->second.kind != ConfigValue::Kind::array)
      fail(ErrorKind::config, "config key eval.k must be an array of integers");
    k_values.clear();
    for (const ConfigValue& v : it->second.items) {
      if (v.kind != ConfigValue::Kind::integer)
        fail(ErrorKind::config, "config key eval.k must contain integers");
      k_values.push_back(static_cast<int>(v.integer));
    }
  }

  take_int(table, "trainer.n_items", &synthetic.n_items);
  take_int(table, "trainer.n_dialogues", &synthetic.n_dialogues);
  take_real(table, "trainer.zipf_exponent", &synthetic.zipf_exponent);
  take_int(table, "trainer.vocab_size", &synthetic.vocab_size);
  take_int(table, "trainer.epochs", &train.epochs);
  take_real(table, "trainer.lr", &train.lr);
  take_real(table, "trainer.val_fraction", &train.val_fraction);
  take_int(table, "trainer.text_dim", &train.text_dim);
  take_bool(table, "trainer.resample", &train.resample);
  take_int(table, "trainer.seeds", &experiment_seeds);

  take_string(table, "run.out", &out_dir);
  take_int(table, "run.seed", &seed);
}

void RunConfig::validate() const {
  if (!corpus_path.empty() && !std::filesystem::exists(corpus_path))
    fail(ErrorKind::config, "configured corpus path does not exist: " + corpus_path);
  if (!std::is_sorted(k_values.begin(), k_values.end()))
    fail(ErrorKind::config, "eval k list must be sorted ascending");
  if (k_values.empty()) fail(ErrorKind::config, "eval k list must not be empty");
  for (int k : k_values) {
    if (k < 1) fail(ErrorKind::config, "eval k values must be >= 1");
  }
  if (embedder != "hashed" && embedder != "remote")
    fail(ErrorKind::config, "embedder must be \"hashed\" or \"remote\"");
  if (embedder == "remote" && remote_embed_url.empty())
    fail(ErrorKind::config, "embedder=remote requires embed.remote_url");
  loss.validate();
  weights.validate();
  augment.validate();
  synthetic.validate();
}

std::string RunConfig::snapshot_json() const {
  json doc;
  doc["corpus"] = {{"train", corpus_path}};
  doc["segmentation"] = {{"tail_max", tail_max}, {"body_max", body_max}, {"quartile", quartile}};
  doc["embed"] = {{"dim", embed_dim},
                  {"embedder", embedder},
                  {"remote_url", remote_embed_url},
                  {"remote_model", remote_embed_model},
                  {"lexicon", lexicon_path}};
  doc["loss"] = {{"alpha", loss.alpha},
                 {"gamma", loss.gamma},
                 {"beta", loss.beta},
                 {"k", loss.k},
                 {"epsilon", loss.epsilon},
                 {"epsilon_alpha", loss.effective_epsilon_alpha()},
                 {"alpha_min", loss.alpha_min},
                 {"alpha_max", loss.alpha_max},
                 {"gamma_min", loss.gamma_min},
                 {"gamma_max", loss.gamma_max},
                 {"theta_min", loss.theta_min},
                 {"theta_max", loss.theta_max},
                 {"adaptive", loss.adaptive},
                 {"mask_direction", mask_direction_name(loss.mask_direction)},
                 {"use_class_weights", loss.use_class_weights},
                 {"use_sample_weights", loss.use_sample_weights}};
  doc["prototype"] = {{"w_sem", weights.sem},
                      {"w_emo", weights.emo},
                      {"w_mov", weights.mov},
                      {"w_int", weights.interaction},
                      {"steepness", weights.steepness},
                      {"normalize_mov", weights.normalize_mov},
                      {"K", support_k},
                      {"strategy", prototype_strategy}};
  doc["augment"] = {{"temperature", augment.temperature},
                    {"tail_count_min", augment.tail_count_min},
                    {"tail_count_max", augment.tail_count_max},
                    {"body_count_min", augment.body_count_min},
                    {"body_count_max", augment.body_count_max},
                    {"filter_threshold", augment.filter_threshold},
                    {"judge_count", augment.judge_count},
                    {"accept_min", augment.accept_min},
                    {"review_min", augment.review_min},
                    {"rho", augment.rho},
                    {"max_in_flight", augment.max_in_flight},
                    {"chat_url", chat_url},
                    {"chat_model", chat_model}};
  doc["eval"] = {{"k", k_values}};
  doc["trainer"] = {{"n_items", synthetic.n_items},
                    {"n_dialogues", synthetic.n_dialogues},
                    {"zipf_exponent", synthetic.zipf_exponent},
                    {"vocab_size", synthetic.vocab_size},
                    {"epochs", train.epochs},
                    {"lr", train.lr},
                    {"val_fraction", train.val_fraction},
                    {"text_dim", train.text_dim},
                    {"resample", train.resample},
                    {"seeds", experiment_seeds}};
  doc["run"] = {{"out", out_dir}, {"seed", seed}};
  return doc.dump(2);
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.push_back({path.string(), sha256_file_hex(path)});
}

void RunManifest::add_artifact(const std::filesystem::path& path) {
  artifacts.push_back({path.string(), sha256_file_hex(path)});
}

std::string RunManifest::to_json_string() const {
  json doc;
  doc["config_hash"] = config_hash;
  doc["tool_version"] = tool_version;
  doc["started_at"] = started_at;
  doc["finished_at"] = finished_at;
  doc["subcommand"] = subcommand;
  json in = json::array();
  for (const ManifestFile& f : inputs) in.push_back({{"path", f.path}, {"sha256", f.sha256}});
  doc["inputs"] = in;
  json out = json::array();
  for (const ManifestFile& f : artifacts) out.push_back({{"path", f.path}, {"sha256", f.sha256}});
  doc["artifacts"] = out;
  return doc.dump(2);
}

void RunManifest::write(const std::filesystem::path& path) const {
  atomic_write_file(path, to_json_string() + "\n");
}

}  // namespace lumi
