#include "heston/report.hpp"

#include <algorithm>

#include "heston/io.hpp"

namespace heston {

std::string to_string(CheckStatus status) {
    switch (status) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Inconclusive: return "inconclusive";
        case CheckStatus::NotApplicable: return "not_applicable";
    }
    return "fail";
}

nlohmann::json ReportEntry::to_json() const {
    return {{"id", id},
            {"property", property},
            {"measured", measured},
            {"threshold", threshold},
            {"status", to_string(status)},
            {"details", details}};
}

bool VerificationReport::overall() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const ReportEntry& e) { return e.passed(); });
}

const ReportEntry* VerificationReport::find(const std::string& id) const {
    for (const ReportEntry& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const ReportEntry& e : entries) arr.push_back(e.to_json());
    return {{"overall", overall() ? "pass" : "fail"}, {"checks", arr}};
}

std::string VerificationReport::to_table() const {
    std::size_t id_w = 5, st_w = 6;
    for (const ReportEntry& e : entries) {
        id_w = std::max(id_w, e.id.size());
        st_w = std::max(st_w, to_string(e.status).size());
    }
    std::string out;
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(w, s.size()), ' ');
        return s;
    };
    out += pad("check", id_w) + "  " + pad("status", st_w) +
           "  measured      threshold     property\n";
    for (const ReportEntry& e : entries) {
        out += pad(e.id, id_w) + "  " + pad(to_string(e.status), st_w) + "  " +
               pad(format_number(e.measured), 12) + "  " +
               pad(format_number(e.threshold), 12) + "  " + e.property + "\n";
    }
    out += "overall: ";
    out += overall() ? "pass" : "fail";
    out += '\n';
    return out;
}

}  // namespace heston
