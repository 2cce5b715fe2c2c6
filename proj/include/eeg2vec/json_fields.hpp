#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "eeg2vec/error.hpp"

namespace eeg2vec {

/// Reads optional fields from a JSON object and rejects keys nobody asked
/// for. Missing fields keep the caller's default.
class JsonFields {
public:
    JsonFields(const nlohmann::json& j, std::string context) : j_(j), context_(std::move(context)) {
        require(j_.is_object(), ErrorKind::config, context_ + ": expected a JSON object");
    }

    template <class V>
    JsonFields& opt(const std::string& key, V& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return *this;
        try {
            out = j_.at(key).get<V>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::config, context_ + "." + key + ": " + e.what());
        }
        return *this;
    }

    template <class V>
    JsonFields& req(const std::string& key, V& out) {
        require(j_.contains(key), ErrorKind::config, context_ + ": missing required key '" + key + "'");
        return opt(key, out);
    }

    /// Sub-object accessor; marks the key as known.
    const nlohmann::json* child(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            require(seen_.contains(key), ErrorKind::config, context_ + ": unknown key '" + key + "'");
    }

private:
    const nlohmann::json& j_;
    std::string context_;
    std::set<std::string> seen_;
};

}  // namespace eeg2vec
