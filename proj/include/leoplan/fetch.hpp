#pragma once

#include <stdexcept>
#include <string>

namespace leoplan {

enum class FetchErrorKind {
    Network,         // DNS/connect/read failure
    Timeout,         // deadline exceeded
    NonSuccessStatus // HTTP status outside 2xx
};

class FetchError : public std::runtime_error {
  public:
    FetchError(FetchErrorKind kind, int status, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind), status_(status) {}

    FetchErrorKind kind() const { return kind_; }
    int status() const { return status_; } // meaningful for NonSuccessStatus only

  private:
    FetchErrorKind kind_;
    int status_;
};

/// Plain GET of the given http(s) URL; returns the raw response body for
/// load_catalog. No parsing happens here.
std::string fetch_catalog(const std::string& url, double timeout_s = 10.0);

} // namespace leoplan
