#pragma once

#include <string>

#include <json.hpp>

namespace guidecqr::detail {

struct HttpRetryPolicy {
  int max_retries = 3;
  int backoff_ms = 250;
  int timeout_seconds = 30;
};

/// POSTs `body` to `base_url + path` and returns the parsed JSON reply.
///
/// Transport failures, 429 and 5xx replies are retried with exponential
/// backoff; the last failure is rethrown as HttpError. Other non-2xx replies
/// throw HttpError immediately, an unparsable body throws ProtocolError.
/// When GCQR_EMBED_API_KEY is set it is sent as a bearer token.
nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body, const HttpRetryPolicy& policy);

}  // namespace guidecqr::detail
