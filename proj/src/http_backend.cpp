#include "uqkit/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "uqkit/errors.hpp"
#include "uqkit/types.hpp"

namespace uq {

namespace {

using nlohmann::json;

std::string env_or_empty(const char* name) {
  const char* value = std::getenv(name);
  return value == nullptr ? std::string() : std::string(value);
}

// "https://host:port/path" -> ("https://host:port", "/path")
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("base_url must start with http:// or https://");
  }
  const std::size_t path = base_url.find('/', scheme + 3);
  if (path == std::string::npos) {
    return {base_url, ""};
  }
  std::string prefix = base_url.substr(path);
  while (!prefix.empty() && prefix.back() == '/') {
    prefix.pop_back();
  }
  return {base_url.substr(0, path), prefix};
}

// POST with bounded retries on connection failures and 5xx statuses; other
// HTTP errors surface immediately.
json post_json(const HttpSettings& settings, const std::string& path, const json& body) {
  const auto [host, prefix] = split_base_url(settings.base_url);

  httplib::Client client(host);
  client.set_connection_timeout(settings.timeout_ms / 1000, (settings.timeout_ms % 1000) * 1000);
  client.set_read_timeout(settings.timeout_ms / 1000, (settings.timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (!settings.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + settings.api_key);
  }

  const std::string payload = body.dump();
  const std::string target = prefix + path;
  std::string last_failure;
  int backoff_ms = settings.initial_backoff_ms;
  for (int attempt = 1; attempt <= settings.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
    httplib::Result result = client.Post(target, headers, payload, "application/json");
    if (!result) {
      last_failure = "connection failed: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 500) {
      last_failure = "server returned status " + std::to_string(result->status);
      continue;
    }
    if (result->status < 200 || result->status >= 300) {
      throw TransportError("POST " + target + " returned status " +
                           std::to_string(result->status) + ": " + result->body);
    }
    try {
      return json::parse(result->body);
    } catch (const json::exception& error) {
      throw TransportError("POST " + target + " returned malformed JSON: " +
                           std::string(error.what()));
    }
  }
  throw TransportError("POST " + target + " failed after " +
                       std::to_string(settings.max_attempts) + " attempts; last error: " +
                       last_failure);
}

}  // namespace

HttpSettings HttpSettings::from_env() {
  HttpSettings settings;
  settings.base_url = env_or_empty("UQ_API_BASE");
  settings.api_key = env_or_empty("UQ_API_KEY");
  return settings;
}

OpenAiChatProvider::OpenAiChatProvider(HttpSettings settings,
                                       std::shared_ptr<TransportCounter> counter)
    : settings_(std::move(settings)), counter_(std::move(counter)) {
  if (settings_.base_url.empty()) {
    throw ConfigError("chat provider needs a base_url (or UQ_API_BASE)");
  }
}

std::string OpenAiChatProvider::id() const { return "openai-chat:" + settings_.chat_model; }

Generation OpenAiChatProvider::complete(const ChatRequest& request, int sample_index) {
  request.validate();
  json body = {
      {"model", settings_.chat_model},
      {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"n", 1},
  };
  if (request.want_logprobs) {
    body["logprobs"] = true;
  }
  if (request.seed.has_value()) {
    body["seed"] = static_cast<std::int64_t>(*request.seed +
                                             static_cast<std::uint64_t>(sample_index));
  }

  if (counter_ != nullptr) {
    counter_->add_chat();
  }
  const json reply = post_json(settings_, "/chat/completions", body);

  if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) {
    throw EmptyResponseError("chat completion returned no choices");
  }
  const json& choice = reply["choices"][0];

  Generation generation;
  try {
    generation.text = choice.at("message").at("content").get<std::string>();
  } catch (const json::exception& error) {
    throw TransportError("chat completion choice is malformed: " + std::string(error.what()));
  }

  if (request.want_logprobs && choice.contains("logprobs") && !choice["logprobs"].is_null()) {
    std::vector<TokenLogprob> logprobs;
    try {
      for (const json& entry : choice.at("logprobs").at("content")) {
        logprobs.push_back(
            {entry.at("token").get<std::string>(), entry.at("logprob").get<double>()});
      }
    } catch (const json::exception& error) {
      throw TransportError("chat completion logprobs are malformed: " +
                           std::string(error.what()));
    }
    generation.token_logprobs = std::move(logprobs);
  }
  generation.validate();
  return generation;
}

OpenAiEmbeddingProvider::OpenAiEmbeddingProvider(HttpSettings settings,
                                                 std::shared_ptr<TransportCounter> counter)
    : settings_(std::move(settings)), counter_(std::move(counter)) {
  if (settings_.base_url.empty()) {
    throw ConfigError("embedding provider needs a base_url (or UQ_API_BASE)");
  }
}

std::string OpenAiEmbeddingProvider::id() const {
  return "openai-embed:" + settings_.embedding_model;
}

EmbeddingVector OpenAiEmbeddingProvider::embed_one(const std::string& text) {
  const json body = {
      {"model", settings_.embedding_model},
      {"input", json::array({text})},
  };
  if (counter_ != nullptr) {
    counter_->add_embed();
  }
  const json reply = post_json(settings_, "/embeddings", body);
  if (!reply.contains("data") || !reply["data"].is_array() || reply["data"].empty()) {
    throw EmptyResponseError("embedding endpoint returned no data");
  }
  EmbeddingVector vector;
  try {
    vector.values = reply["data"][0].at("embedding").get<std::vector<double>>();
  } catch (const json::exception& error) {
    throw TransportError("embedding payload is malformed: " + std::string(error.what()));
  }
  vector.validate();
  return vector;
}

const char kEntailmentPromptTemplate[] =
    "Classify the logical relationship between the premise and the hypothesis.\n"
    "\n"
    "Premise:\n"
    "{premise}\n"
    "\n"
    "Hypothesis:\n"
    "{hypothesis}\n"
    "\n"
    "Reply with a JSON object of class probabilities summing to 1, exactly in this "
    "form and nothing else:\n"
    "{\"entailment\": 0.0, \"neutral\": 0.0, \"contradiction\": 0.0}\n";

ChatEntailmentAdapter::ChatEntailmentAdapter(std::shared_ptr<ChatProvider> chat,
                                             double temperature)
    : chat_(std::move(chat)), temperature_(temperature) {
  if (chat_ == nullptr) {
    throw ConfigError("entailment adapter needs a chat provider");
  }
}

std::string ChatEntailmentAdapter::id() const { return "chat-entail:" + chat_->id(); }

EntailmentJudgment ChatEntailmentAdapter::entail(const std::string& premise,
                                                 const std::string& hypothesis) {
  std::string prompt = kEntailmentPromptTemplate;
  const auto substitute = [&prompt](const std::string& placeholder, const std::string& value) {
    const std::size_t pos = prompt.find(placeholder);
    if (pos != std::string::npos) {
      prompt.replace(pos, placeholder.size(), value);
    }
  };
  substitute("{premise}", premise);
  substitute("{hypothesis}", hypothesis);

  ChatRequest request;
  request.prompt = prompt;
  request.sample_count = 1;
  request.temperature = temperature_;
  const std::string reply = chat_generate(*chat_, request).front().text;

  // The model may wrap the object in prose; take the outermost braces.
  const std::size_t open = reply.find('{');
  const std::size_t close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close <= open) {
    throw ParseFailure("entailment reply contains no JSON object: \"" + reply + "\"");
  }
  json parsed;
  try {
    parsed = json::parse(reply.substr(open, close - open + 1));
  } catch (const json::exception& error) {
    throw ParseFailure("entailment reply is not valid JSON: " + std::string(error.what()));
  }
  try {
    return EntailmentJudgment::validated(parsed.at("entailment").get<double>(),
                                         parsed.at("neutral").get<double>(),
                                         parsed.at("contradiction").get<double>());
  } catch (const json::exception& error) {
    throw ParseFailure("entailment reply lacks the three class probabilities: " +
                       std::string(error.what()));
  }
}

}  // namespace uq
