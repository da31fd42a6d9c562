#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "getkos/bundle.hpp"

namespace getkos::service {

inline constexpr std::size_t kMaxBodyBytes = 64 * 1024;

struct Reply {
  int status = 200;
  nlohmann::json body;
};

inline nlohmann::json metadata(const bundle::ModelBundle& b) {
  const auto& enc = b.encoder;
  nlohmann::json by_city = nlohmann::json::object();
  for (const auto& city : enc.kota.tokens()) by_city[city] = nlohmann::json::array();
  for (std::size_t a = 0; a < enc.area.size(); ++a) {
    for (auto k : enc.area_cities[a]) {
      by_city[enc.kota.tokens()[k - 1]].push_back(enc.area.tokens()[a]);
    }
  }
  return {{"cities", enc.kota.tokens()},
          {"areas_by_city", by_city},
          {"types", enc.type_kos.tokens()},
          {"facilities", b.facility_catalog},
          {"model",
           {{"arch", b.metadata.arch_summary},
            {"validation_mae_idr", b.metadata.val_mae},
            {"format_version", b.metadata.format_version}}}};
}

inline nlohmann::json health(const bundle::ModelBundle& b) {
  return {{"status", "ok"}, {"format_version", b.metadata.format_version}};
}

inline Reply error_reply(int status, std::string message, std::string field = {}) {
  nlohmann::json body = {{"error", std::move(message)}};
  if (!field.empty()) body["field"] = std::move(field);
  return {status, std::move(body)};
}

/// POST /api/predict body -> reply. Never throws on client input.
inline Reply handle_predict(const bundle::ModelBundle& b, std::string_view body) {
  if (body.size() > kMaxBodyBytes) {
    return error_reply(413, "request body exceeds 64 KiB");
  }
  const auto req = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (req.is_discarded()) return error_reply(400, "body is not valid JSON");
  if (!req.is_object()) return error_reply(400, "body must be a JSON object");

  std::string fields[3];
  const char* names[3] = {"kota", "area", "type_kos"};
  for (int i = 0; i < 3; ++i) {
    auto it = req.find(names[i]);
    if (it == req.end()) return error_reply(400, "missing field", names[i]);
    if (!it->is_string()) return error_reply(400, "field must be a string", names[i]);
    fields[i] = it->get<std::string>();
  }
  std::vector<std::string> facilities;
  if (auto it = req.find("facilities"); it != req.end()) {
    if (!it->is_array()) {
      return error_reply(400, "field must be an array of strings", "facilities");
    }
    for (const auto& f : *it) {
      if (!f.is_string()) {
        return error_reply(400, "field must be an array of strings", "facilities");
      }
      facilities.push_back(f.get<std::string>());
    }
  }
  const auto p = bundle::predict(b, fields[0], fields[1], fields[2], facilities);
  return {200, bundle::to_json(p)};
}

namespace detail {

inline void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

inline void method_not_allowed(httplib::Server& svr, const std::string& path,
                               bool get_allowed) {
  auto deny = [](const httplib::Request&, httplib::Response& res) {
    send(res, error_reply(405, "method not allowed"));
  };
  if (get_allowed) {
    svr.Post(path, deny);
  } else {
    svr.Get(path, deny);
  }
  svr.Put(path, deny);
  svr.Patch(path, deny);
  svr.Delete(path, deny);
}

}  // namespace detail

/// Routes over a bundle that must outlive the server. Handlers only read the
/// bundle, so the server's worker threads share it without locking.
inline std::unique_ptr<httplib::Server> make_server(const bundle::ModelBundle& b) {
  auto svr = std::make_unique<httplib::Server>();
  svr->set_payload_max_length(kMaxBodyBytes);

  svr->Get("/healthz", [&b](const httplib::Request&, httplib::Response& res) {
    detail::send(res, {200, health(b)});
  });
  svr->Get("/api/metadata", [&b](const httplib::Request&, httplib::Response& res) {
    detail::send(res, {200, metadata(b)});
  });
  svr->Post("/api/predict", [&b](const httplib::Request& req, httplib::Response& res) {
    detail::send(res, handle_predict(b, req.body));
  });
  svr->Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  detail::method_not_allowed(*svr, "/healthz", true);
  detail::method_not_allowed(*svr, "/api/metadata", true);
  detail::method_not_allowed(*svr, "/api/predict", false);

  svr->set_post_routing_handler([](const httplib::Request& req,
                                   httplib::Response& res) {
    if (req.path.rfind("/api/", 0) == 0) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
  });
  svr->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const char* msg = res.status == 413 ? "request body exceeds 64 KiB"
                        : res.status == 404 ? "not found"
                                            : "request error";
      detail::send(res, error_reply(res.status, msg));
    }
  });
  svr->set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        detail::send(res, error_reply(500, "internal error"));
      });
  return svr;
}

}  // namespace getkos::service
