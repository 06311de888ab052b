// OpenAI-compatible HTTP backends: chat completion client, judge adapter,
// and remote embedder. All three read the API key from LUMI_API_KEY and log
// request outcomes to stderr with the key redacted.

#include <cstdlib>
#include <iostream>

#include "httplib.h"
#include "json.hpp"
#include "lumi/augment.hpp"
#include "lumi/embed.hpp"
#include "lumi/util.hpp"

namespace lumi {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    fail(ErrorKind::config, "endpoint url must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string api_key() {
  const char* key = std::getenv("LUMI_API_KEY");
  return key == nullptr ? std::string{} : std::string(key);
}

// Returns the response body or an error message; never throws.
std::pair<bool, std::string> post_json(const std::string& url, const json& body) {
  const Endpoint ep = split_url(url);
  httplib::Client client(ep.base);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(60, 0);
  httplib::Headers headers;
  const std::string key = api_key();
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  const std::string payload = body.dump();
  auto res = client.Post(ep.path, headers, payload, "application/json");
  std::cerr << "[lumi] POST " << url << " (authorization: "
            << (key.empty() ? "none" : "Bearer <redacted>") << ") -> "
            << (res ? std::to_string(res->status) : std::string("transport error")) << "\n";
  if (!res) return {false, "transport error: " + httplib::to_string(res.error())};
  if (res->status < 200 || res->status >= 300)
    return {false, "http status " + std::to_string(res->status) + ": " + res->body};
  return {true, res->body};
}

class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(std::string url, std::string model)
      : url_(std::move(url)), model_(std::move(model)) {}

  ChatResult complete(const std::string& prompt, double temperature,
                      std::uint64_t seed) override {
    json body{{"model", model_},
              {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
              {"temperature", temperature},
              {"seed", seed}};
    auto [ok, payload] = post_json(url_, body);
    if (!ok) return {false, "", payload};
    try {
      const json doc = json::parse(payload);
      return {true, doc.at("choices").at(0).at("message").at("content").get<std::string>(), ""};
    } catch (const std::exception& e) {
      return {false, "", std::string("malformed chat response: ") + e.what()};
    }
  }

 private:
  std::string url_;
  std::string model_;
};

class HttpJudge : public Judge {
 public:
  HttpJudge(std::string judge_id, std::string url, std::string model)
      : id_(std::move(judge_id)), client_(url, std::move(model)) {}

  std::string id() const override { return id_; }

  JudgeVerdict judge(const Candidate& candidate) override {
    const std::string prompt =
        "Score the following generated movie-recommendation dialogue on three axes, each in "
        "[0,1]: semantic consistency, fluency, recommendation plausibility. Reply with a "
        "single JSON object {\"consistency\": x, \"fluency\": y, \"plausibility\": z}.\n\n" +
        candidate.text;
    JudgeVerdict v;
    v.judge_id = id_;
    const ChatResult res = client_.complete(prompt, 0.0, fnv1a64(candidate.id));
    if (!res.ok) {
      v.error = res.error;
      return v;
    }
    try {
      const json doc = json::parse(res.text);
      v.consistency = doc.at("consistency").get<double>();
      v.fluency = doc.at("fluency").get<double>();
      v.plausibility = doc.at("plausibility").get<double>();
      v.pass = v.consistency >= 0.5 && v.fluency >= 0.5 && v.plausibility >= 0.5;
    } catch (const std::exception& e) {
      v.error = std::string("malformed judge response: ") + e.what();
    }
    return v;
  }

 private:
  std::string id_;
  HttpChatClient client_;
};

class RemoteEmbedder : public Embedder {
 public:
  RemoteEmbedder(std::string url, std::string model, std::size_t dim)
      : url_(std::move(url)), model_(std::move(model)), dim_(dim) {}

  SemanticVector embed(std::string_view text) const override {
    json body{{"model", model_}, {"input", std::string(text)}};
    auto [ok, payload] = post_json(url_, body);
    if (!ok) fail(ErrorKind::io, "remote embedding failed: " + payload);
    try {
      const json doc = json::parse(payload);
      std::vector<double> values =
          doc.at("data").at(0).at("embedding").get<std::vector<double>>();
      if (values.size() != dim_)
        fail(ErrorKind::config, "remote embedding dimension " + std::to_string(values.size()) +
                                    " != configured " + std::to_string(dim_));
      return SemanticVector::from_values(std::move(values));
    } catch (const json::exception& e) {
      fail(ErrorKind::parse, std::string("malformed embedding response: ") + e.what());
    }
  }

  std::size_t dim() const override { return dim_; }

 private:
  std::string url_;
  std::string model_;
  std::size_t dim_;
};

}  // namespace

std::unique_ptr<ChatClient> make_http_chat_client(const std::string& url,
                                                  const std::string& model) {
  return std::make_unique<HttpChatClient>(url, model);
}

std::unique_ptr<Judge> make_http_judge(const std::string& judge_id, const std::string& url,
                                       const std::string& model) {
  return std::make_unique<HttpJudge>(judge_id, url, model);
}

std::unique_ptr<Embedder> make_remote_embedder(const std::string& url, const std::string& model,
                                               std::size_t dim) {
  return std::make_unique<RemoteEmbedder>(url, model, dim);
}

}  // namespace lumi
