#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gfflab {

// One Monte Carlo estimate, fully reproducible from (master_seed, quantity,
// trial range). CSV column order is fixed:
//   quantity,d,param1,param2,margin,trials,successes,p_hat,ci_low,ci_high,master_seed
// wall_time_s and the extras below appear only in the JSON mirror and are
// excluded from determinism comparisons.
struct EstimateRecord {
    std::string quantity;
    int d = 0;
    std::int64_t param1 = 0; // primary scale: N, or |x| for two-point
    std::int64_t param2 = 0; // inner radius n for crossing, else 0
    double margin = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;
    double p_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::uint64_t master_seed = 0;

    // JSON-only side data.
    double wall_time_s = 0.0;
    std::int64_t box_radius = 0;
    std::string bitmap_hex; // per-trial success bits, little-endian nibbles; may be empty

    bool operator==(const EstimateRecord& o) const {
        return quantity == o.quantity && d == o.d && param1 == o.param1 &&
               param2 == o.param2 && margin == o.margin && trials == o.trials &&
               successes == o.successes && p_hat == o.p_hat && ci_low == o.ci_low &&
               ci_high == o.ci_high && master_seed == o.master_seed;
    }
};

// Bit helpers for the per-trial success masks.
std::string bitmap_to_hex(const std::vector<std::uint8_t>& bits);
std::vector<std::uint8_t> bitmap_from_hex(const std::string& hex, std::uint64_t trials);

std::string records_to_csv(const std::vector<EstimateRecord>& records);
std::vector<EstimateRecord> records_from_csv(const std::string& csv);

std::string records_to_json(const std::vector<EstimateRecord>& records,
                            const std::string& fit_json = "");
std::vector<EstimateRecord> records_from_json(const std::string& json_text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace gfflab
