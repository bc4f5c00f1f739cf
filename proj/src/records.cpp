#include "gfflab/records.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gfflab/errors.hpp"

namespace gfflab {

namespace {

constexpr const char* kCsvHeader =
    "quantity,d,param1,param2,margin,trials,successes,p_hat,ci_low,ci_high,master_seed";

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ValidationError("bad hex digit in bitmap");
}

} // namespace

std::string bitmap_to_hex(const std::vector<std::uint8_t>& bits) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve((bits.size() + 3) / 4);
    for (std::size_t i = 0; i < bits.size(); i += 4) {
        int v = 0;
        for (std::size_t j = 0; j < 4 && i + j < bits.size(); ++j)
            if (bits[i + j]) v |= 1 << j;
        out.push_back(digits[v]);
    }
    return out;
}

std::vector<std::uint8_t> bitmap_from_hex(const std::string& hex, std::uint64_t trials) {
    if (hex.size() != (trials + 3) / 4)
        throw ValidationError("bitmap length does not match trial count");
    std::vector<std::uint8_t> bits(trials, 0);
    for (std::uint64_t t = 0; t < trials; ++t) {
        const int v = hex_digit(hex[t / 4]);
        bits[t] = static_cast<std::uint8_t>((v >> (t % 4)) & 1);
    }
    return bits;
}

std::string records_to_csv(const std::vector<EstimateRecord>& records) {
    std::string out(kCsvHeader);
    out.push_back('\n');
    char buf[512];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%lld,%lld,%.6g,%llu,%llu,%.10g,%.10g,%.10g,%llu\n",
                      r.quantity.c_str(), r.d, static_cast<long long>(r.param1),
                      static_cast<long long>(r.param2), r.margin,
                      static_cast<unsigned long long>(r.trials),
                      static_cast<unsigned long long>(r.successes), r.p_hat, r.ci_low,
                      r.ci_high, static_cast<unsigned long long>(r.master_seed));
        out += buf;
    }
    return out;
}

std::vector<EstimateRecord> records_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ValidationError("unexpected CSV header: " + line);
    std::vector<EstimateRecord> out;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 11) throw ValidationError("CSV row must have 11 columns: " + line);
        EstimateRecord r;
        r.quantity = f[0];
        r.d = std::atoi(f[1].c_str());
        r.param1 = std::strtoll(f[2].c_str(), nullptr, 10);
        r.param2 = std::strtoll(f[3].c_str(), nullptr, 10);
        r.margin = std::strtod(f[4].c_str(), nullptr);
        r.trials = std::strtoull(f[5].c_str(), nullptr, 10);
        r.successes = std::strtoull(f[6].c_str(), nullptr, 10);
        r.p_hat = std::strtod(f[7].c_str(), nullptr);
        r.ci_low = std::strtod(f[8].c_str(), nullptr);
        r.ci_high = std::strtod(f[9].c_str(), nullptr);
        r.master_seed = std::strtoull(f[10].c_str(), nullptr, 10);
        out.push_back(std::move(r));
    }
    return out;
}

std::string records_to_json(const std::vector<EstimateRecord>& records,
                            const std::string& fit_json) {
    nlohmann::json j;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json jr;
        jr["quantity"] = r.quantity;
        jr["d"] = r.d;
        jr["param1"] = r.param1;
        jr["param2"] = r.param2;
        jr["margin"] = r.margin;
        jr["trials"] = r.trials;
        jr["successes"] = r.successes;
        jr["p_hat"] = r.p_hat;
        jr["ci_low"] = r.ci_low;
        jr["ci_high"] = r.ci_high;
        jr["master_seed"] = r.master_seed;
        jr["wall_time_s"] = r.wall_time_s;
        jr["box_radius"] = r.box_radius;
        if (!r.bitmap_hex.empty()) jr["bitmap_hex"] = r.bitmap_hex;
        j["records"].push_back(jr);
    }
    if (!fit_json.empty()) j["fit"] = nlohmann::json::parse(fit_json);
    return j.dump(2);
}

std::vector<EstimateRecord> records_from_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    if (!j.contains("records")) throw ValidationError("JSON has no records array");
    std::vector<EstimateRecord> out;
    for (const auto& jr : j["records"]) {
        EstimateRecord r;
        r.quantity = jr.at("quantity").get<std::string>();
        r.d = jr.at("d").get<int>();
        r.param1 = jr.at("param1").get<std::int64_t>();
        r.param2 = jr.at("param2").get<std::int64_t>();
        r.margin = jr.at("margin").get<double>();
        r.trials = jr.at("trials").get<std::uint64_t>();
        r.successes = jr.at("successes").get<std::uint64_t>();
        r.p_hat = jr.at("p_hat").get<double>();
        r.ci_low = jr.at("ci_low").get<double>();
        r.ci_high = jr.at("ci_high").get<double>();
        r.master_seed = jr.at("master_seed").get<std::uint64_t>();
        r.wall_time_s = jr.value("wall_time_s", 0.0);
        r.box_radius = jr.value("box_radius", static_cast<std::int64_t>(0));
        r.bitmap_hex = jr.value("bitmap_hex", std::string());
        out.push_back(std::move(r));
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path);
    f << content;
    if (!f) throw Error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace gfflab
