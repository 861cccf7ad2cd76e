#pragma once

// cpp-httplib backed Transport for the generation job. https endpoints need
// CPPHTTPLIB_OPENSSL_SUPPORT and libssl.

#include <chrono>
#include <string>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "ldsp/dataset_gen.hpp"
#include "ldsp/error.hpp"

namespace ldsp::gen {

struct UrlParts {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::InvalidArgument, "endpoint URL must start with http:// or https://: '" + url + "'");
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw Error(ErrorCode::InvalidArgument, "unsupported URL scheme '" + scheme + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline Transport http_transport(std::chrono::seconds timeout = std::chrono::seconds(120)) {
    return [timeout](const HttpRequest& req) {
        const UrlParts parts = split_url(req.url);
        httplib::Client client(parts.origin);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [k, v] : req.headers) {
            if (k == "Content-Type") content_type = v;
            else headers.emplace(k, v);
        }
        HttpResponse out;
        auto res = client.Post(parts.path, headers, req.body, content_type);
        if (!res) {
            out.status = 0;
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    };
}

}  // namespace ldsp::gen
