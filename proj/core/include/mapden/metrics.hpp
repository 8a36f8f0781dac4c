#ifndef MAPDEN_METRICS_HPP
#define MAPDEN_METRICS_HPP

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mapden/dataset.hpp"

namespace mapden {

/// sqrt(sum((a_i - b_i)^2) / n).
double rmse(const std::vector<double>& a, const std::vector<double>& b);

/// Pearson correlation. Throws DegenerateSignalError for a constant input.
double pcc(const std::vector<double>& a, const std::vector<double>& b);

/// 20*log10(max_value) - 10*log10(MSE); +inf sentinel when MSE == 0.
/// as_printed drops the factor 10 on the MSE term (audit mode).
double psnr(const std::vector<double>& clean, const std::vector<double>& other,
            double max_value = 1.0, bool as_printed = false);

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0; // population std over per-beat values

    bool operator==(const MetricStats&) const = default;
};

struct ReportRow {
    Split split;
    std::string label; // Noisy | Filtered | VAE
    MetricStats rmse, pcc, psnr;
    std::size_t count = 0;

    bool operator==(const ReportRow&) const = default;
};

struct BeatDetail {
    std::string beat_id;
    Split split;
    std::string label;
    double rmse, pcc, psnr;

    bool operator==(const BeatDetail&) const = default;
};

struct EvalReport {
    std::vector<ReportRow> rows; // 2 splits x 3 labels, fixed order
    std::vector<BeatDetail> detail;
    std::string noise_plan_desc;
    std::string config_hash;
    bool psnr_as_printed = false;

    const ReportRow& row(Split split, const std::string& label) const;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    bool operator==(const EvalReport&) const = default;
};

/// Per-beat metrics of noisy/filtered/vae against the clean reference,
/// aggregated per (split, label). All four sets must hold exactly the same
/// beat_ids; the clean set supplies split tags. Order-insensitive.
EvalReport evaluate(const Dataset& clean, const Dataset& noisy, const Dataset& filtered,
                    const Dataset& vae, bool psnr_as_printed = false);

/// report.json (full fidelity) and report.csv (the 6 aggregate rows).
void emit_report(const EvalReport& report, const std::string& json_path,
                 const std::string& csv_path);
EvalReport read_report(const std::string& json_path);

/// 4-column per-sample CSV (clean,noisy,filtered,vae) for one beat.
void emit_plot_data(const Dataset& clean, const Dataset& noisy, const Dataset& filtered,
                    const Dataset& vae, const std::string& beat_id, const std::string& path);

} // namespace mapden

#endif
