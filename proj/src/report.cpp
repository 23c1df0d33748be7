#include "steinlab/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace steinlab {

std::string format_double(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

void dump_into(const nlohmann::json& j, std::string& out) {
    switch (j.type()) {
    case nlohmann::json::value_t::object: {
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {  // std::map storage: keys already sorted
            if (!first) out += ',';
            first = false;
            out += nlohmann::json(it.key()).dump();
            out += ':';
            dump_into(it.value(), out);
        }
        out += '}';
        break;
    }
    case nlohmann::json::value_t::array: {
        out += '[';
        for (std::size_t k = 0; k < j.size(); ++k) {
            if (k) out += ',';
            dump_into(j[k], out);
        }
        out += ']';
        break;
    }
    case nlohmann::json::value_t::number_float:
        out += format_double(j.get<double>());
        break;
    default:
        out += j.dump();
    }
}

nlohmann::json ci_json(const McEstimate& e) {
    if (e.count() < 2) return nullptr;
    const auto [lo, hi] = e.ci95();
    return nlohmann::json::array({lo, hi});
}

} // namespace

std::string canonical_dump(const nlohmann::json& j) {
    std::string out;
    dump_into(j, out);
    return out;
}

bool RunReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["parameters"] = parameters;
    j["seed"] = seed;
    j["version"] = version;
    j["estimates"] = nlohmann::json::array();
    for (const auto& e : estimates)
        j["estimates"].push_back({{"name", e.name},
                                  {"value", e.estimate.mean()},
                                  {"stderr", e.estimate.std_error()},
                                  {"ci95", ci_json(e.estimate)},
                                  {"count", e.estimate.count()}});
    j["bounds"] = nlohmann::json::array();
    for (const auto& b : bounds) j["bounds"].push_back({{"name", b.name}, {"value", b.value}});
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}, {"tolerance", c.tolerance}});
    j["warnings"] = warnings;
    j["pass"] = all_pass();
    return j;
}

std::string RunReport::to_canonical_json() const { return canonical_dump(to_json()) + "\n"; }

std::string RunReport::to_csv() const {
    std::ostringstream os;
    os << "name,value,stderr,ci_lo,ci_hi,count\n";
    for (const auto& e : estimates) {
        std::string lo = "", hi = "";
        if (e.estimate.count() >= 2) {
            const auto ci = e.estimate.ci95();
            lo = format_double(ci.first);
            hi = format_double(ci.second);
        }
        std::string name = e.name;
        if (name.find_first_of(",\"") != std::string::npos) {
            std::string q = "\"";
            for (char ch : name) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            name = q + "\"";
        }
        os << name << ',' << format_double(e.estimate.mean()) << ',' << format_double(e.estimate.std_error())
           << ',' << lo << ',' << hi << ',' << e.estimate.count() << '\n';
    }
    return os.str();
}

} // namespace steinlab
