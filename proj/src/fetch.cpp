#include "leoplan/fetch.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>

namespace leoplan {

namespace {

struct SplitUrl {
    std::string scheme_host_port; // e.g. "https://celestrak.org"
    std::string path;             // e.g. "/NORAD/elements/stations.txt"
};

SplitUrl split_url(const std::string& url) {
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw FetchError(FetchErrorKind::Network, 0, "malformed URL (missing scheme): " + url);
    }
    const std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

std::string fetch_catalog(const std::string& url, double timeout_s) {
    const SplitUrl parts = split_url(url);
    httplib::Client client(parts.scheme_host_port);
    const auto timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_follow_location(true);

    const httplib::Result result = client.Get(parts.path);
    if (!result) {
        switch (result.error()) {
            case httplib::Error::ConnectionTimeout:
            case httplib::Error::Read:
            case httplib::Error::Write:
                throw FetchError(FetchErrorKind::Timeout, 0,
                                 "timeout fetching " + url + ": " + httplib::to_string(result.error()));
            default:
                throw FetchError(FetchErrorKind::Network, 0,
                                 "network error fetching " + url + ": " +
                                     httplib::to_string(result.error()));
        }
    }
    if (result->status < 200 || result->status >= 300) {
        throw FetchError(FetchErrorKind::NonSuccessStatus, result->status,
                         "HTTP " + std::to_string(result->status) + " fetching " + url);
    }
    return result->body;
}

} // namespace leoplan
