#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace heston {

enum class CheckStatus { Pass, Fail, Inconclusive, NotApplicable };

std::string to_string(CheckStatus status);

/// One verified property.  `property` states the claim in words,
/// `measured` and `threshold` give the deciding numbers, and `details`
/// carries enough of the configuration to rerun the check.
struct ReportEntry {
    std::string id;
    std::string property;
    double measured = 0.0;
    double threshold = 0.0;
    CheckStatus status = CheckStatus::Fail;
    nlohmann::json details = nlohmann::json::object();

    bool passed() const { return status != CheckStatus::Fail; }
    nlohmann::json to_json() const;
};

struct VerificationReport {
    std::vector<ReportEntry> entries;

    bool overall() const;
    const ReportEntry* find(const std::string& id) const;
    nlohmann::json to_json() const;
    std::string to_table() const;  // aligned plain-text summary
};

}  // namespace heston
