#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <regex>

#include "posbias/error.hpp"
#include "posbias/runner.hpp"

namespace posbias {
namespace {

class HttpChatEndpoint final : public ChatEndpoint {
 public:
  HttpChatEndpoint(const std::string& base_url, const std::string& token_env, int timeout_seconds) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(base_url, m, kUrl)) throw ConfigError("invalid endpoint URL: " + base_url);
    origin_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : std::string{};
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
    if (const char* token = std::getenv(token_env.c_str()); token && *token) token_ = token;
    timeout_ = timeout_seconds;
  }

  Completion complete(const TrialCall& call) override {
    // httplib clients are not thread-safe; one per call keeps workers independent.
    httplib::Client client(origin_);
    client.set_connection_timeout(30);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    const auto res = client.Post(path_, headers, call.request.payload().dump(), "application/json");
    if (!res) {
      throw EndpointError("transport failure: " + httplib::to_string(res.error()), true);
    }
    if (res->status == 429 || res->status >= 500) {
      throw EndpointError("HTTP " + std::to_string(res->status), true);
    }
    if (res->status != 200) {
      throw EndpointError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), false);
    }
    return parse_chat_response(res->body, call.request.seed);
  }

 private:
  std::string origin_;
  std::string path_;
  std::string token_;
  int timeout_ = 600;
};

}  // namespace

std::unique_ptr<ChatEndpoint> make_http_endpoint(const std::string& base_url,
                                                 const std::string& token_env, int timeout_seconds) {
  return std::make_unique<HttpChatEndpoint>(base_url, token_env, timeout_seconds);
}

}  // namespace posbias
