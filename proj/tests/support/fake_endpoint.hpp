#pragma once

// Local OpenAI-shaped chat-completions server for wire-level tests.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <atomic>
#include <functional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

namespace aor::test {

class FakeEndpoint {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit FakeEndpoint(Handler handler) {
        server_.Post("/v1/chat/completions",
                     [this, handler = std::move(handler)](const httplib::Request& req,
                                                          httplib::Response& res) {
                         hits_.fetch_add(1);
                         handler(req, res);
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string base_url() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    }
    int hits() const { return hits_.load(); }

    static void ok_completion(const httplib::Request& req, httplib::Response& res,
                              const std::string& text) {
        nlohmann::json body = nlohmann::json::parse(req.body);
        const std::string prompt = body["messages"][0]["content"];
        nlohmann::json reply{
            {"choices",
             nlohmann::json::array(
                 {nlohmann::json{{"message", nlohmann::json{{"role", "assistant"},
                                                            {"content", text}}}}})},
            {"usage",
             nlohmann::json{{"prompt_tokens", static_cast<int>(prompt.size())},
                            {"completion_tokens", static_cast<int>(text.size())}}}};
        res.set_content(reply.dump(), "application/json");
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
};

} // namespace aor::test
