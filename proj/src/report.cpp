#include "tmhd/report.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace tmhd {

void Report::add_check(const std::string& name, double measured, double reference,
                       double tolerance, const std::string& tag, bool pass) {
    rows_.push_back({name, pass ? "pass" : "fail", measured, reference, tolerance, tag});
}

void Report::check_close(const std::string& name, double measured, double reference,
                         double tolerance, const std::string& tag) {
    bool ok = std::isfinite(measured) && std::abs(measured - reference) <= tolerance;
    add_check(name, measured, reference, tolerance, tag, ok);
}

void Report::check_below(const std::string& name, double measured, double bound,
                         const std::string& tag) {
    bool ok = std::isfinite(measured) && measured <= bound;
    add_check(name, measured, bound, bound, tag, ok);
}

void Report::info(const std::string& name, double measured, const std::string& tag) {
    rows_.push_back({name, "info", measured, 0.0, 0.0, tag});
}

void Report::meta(const std::string& key, const std::string& value) { meta_[key] = value; }

bool Report::all_pass() const {
    for (const auto& r : rows_)
        if (r.status == "fail") return false;
    return true;
}

namespace {
std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
}
std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}
}  // namespace

std::string Report::to_csv() const {
    std::string out = "check,status,measured,reference,tolerance,tag\n";
    for (const auto& r : rows_) {
        out += csv_escape(r.check) + "," + r.status + "," + fmt(r.measured) + "," +
               fmt(r.reference) + "," + fmt(r.tolerance) + "," + csv_escape(r.tag) + "\n";
    }
    return out;
}

std::string Report::to_json() const {
    nlohmann::json j;
    j["metadata"] = meta_;
    j["all_pass"] = all_pass();
    for (const auto& r : rows_) {
        j["rows"].push_back({{"check", r.check},
                             {"status", r.status},
                             {"measured", r.measured},
                             {"reference", r.reference},
                             {"tolerance", r.tolerance},
                             {"tag", r.tag}});
    }
    return j.dump(2);
}

std::string Report::to_text() const {
    std::string out;
    for (const auto& r : rows_) {
        out += "[" + r.status + "] " + r.check + "  measured=" + fmt(r.measured);
        if (r.status != "info")
            out += " reference=" + fmt(r.reference) + " tol=" + fmt(r.tolerance);
        if (!r.tag.empty()) out += "  (" + r.tag + ")";
        out += "\n";
    }
    return out;
}

}  // namespace tmhd
