#include "mapden/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "mapden/errors.hpp"

namespace mapden {

namespace {

void check_lengths(const char* op, const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) {
        throw ShapeError(std::string(op) + ": lengths " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

} // namespace

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    check_lengths("rmse", a, b);
    return std::sqrt(mse(a, b));
}

double pcc(const std::vector<double>& a, const std::vector<double>& b) {
    check_lengths("pcc", a, b);
    const double n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        throw DegenerateSignalError("pcc of a constant series");
    }
    return cov / (std::sqrt(var_a) * std::sqrt(var_b));
}

double psnr(const std::vector<double>& clean, const std::vector<double>& other,
            double max_value, bool as_printed) {
    check_lengths("psnr", clean, other);
    const double m = mse(clean, other);
    if (m == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double mse_coeff = as_printed ? 1.0 : 10.0;
    return 20.0 * std::log10(max_value) - mse_coeff * std::log10(m);
}

const ReportRow& EvalReport::row(Split split, const std::string& label) const {
    for (const ReportRow& r : rows) {
        if (r.split == split && r.label == label) return r;
    }
    throw AlignmentError("no report row (" + to_string(split) + ", " + label + ")");
}

namespace {

MetricStats aggregate(const std::vector<double>& values) {
    MetricStats stats;
    if (values.empty()) return stats;

    // Infinite per-beat values (zero-MSE PSNR) dominate the mean; the std is
    // taken over the finite ones.
    std::vector<double> finite;
    bool any_inf = false;
    for (double v : values) {
        if (std::isinf(v)) {
            any_inf = true;
        } else {
            finite.push_back(v);
        }
    }
    if (any_inf) {
        stats.mean = std::numeric_limits<double>::infinity();
        stats.stddev = 0.0;
        if (!finite.empty()) {
            // mixed case: report spread of the finite subset
            double m = 0.0;
            for (double v : finite) m += v;
            m /= static_cast<double>(finite.size());
            double var = 0.0;
            for (double v : finite) var += (v - m) * (v - m);
            stats.stddev = std::sqrt(var / static_cast<double>(finite.size()));
        }
        return stats;
    }
    double m = 0.0;
    for (double v : values) m += v;
    m /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - m) * (v - m);
    stats.mean = m;
    stats.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return stats;
}

std::map<std::string, const Record*> index_by_id(const Dataset& ds, const char* name) {
    std::map<std::string, const Record*> out;
    for (const Record& r : ds.records()) {
        if (!out.emplace(r.beat.beat_id, &r).second) {
            throw AlignmentError(std::string(name) + " set has duplicate beat_id " +
                                 r.beat.beat_id);
        }
    }
    return out;
}

nlohmann::json metric_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double metric_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw ParseError(0, "bad metric value '" + s + "'");
    }
    return j.get<double>();
}

} // namespace

EvalReport evaluate(const Dataset& clean, const Dataset& noisy, const Dataset& filtered,
                    const Dataset& vae, bool psnr_as_printed) {
    const auto clean_by_id = index_by_id(clean, "clean");
    const std::map<std::string, const Dataset*> others{
        {"Noisy", &noisy}, {"Filtered", &filtered}, {"VAE", &vae}};

    EvalReport report;
    report.psnr_as_printed = psnr_as_printed;
    if (clean.config_hash()) report.config_hash = *clean.config_hash();

    std::map<std::pair<Split, std::string>, std::vector<double>> rmse_acc, pcc_acc, psnr_acc;

    for (const auto& [label, ds] : others) {
        const auto by_id = index_by_id(*ds, label.c_str());
        if (by_id.size() != clean_by_id.size()) {
            throw AlignmentError(label + " set has " + std::to_string(by_id.size()) +
                                 " beats, clean has " + std::to_string(clean_by_id.size()));
        }
        for (const auto& [id, rec] : clean_by_id) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw AlignmentError(label + " set is missing beat_id " + id);
            }
            const Record& other = *it->second;
            if (other.beat.samples.size() != rec->beat.samples.size()) {
                throw AlignmentError("beat " + id + " length differs in " + label);
            }
            BeatDetail d;
            d.beat_id = id;
            d.split = rec->split;
            d.label = label;
            d.rmse = rmse(rec->beat.samples, other.beat.samples);
            d.pcc = pcc(rec->beat.samples, other.beat.samples);
            d.psnr = psnr(rec->beat.samples, other.beat.samples, 1.0, psnr_as_printed);
            const auto key = std::make_pair(rec->split, label);
            rmse_acc[key].push_back(d.rmse);
            pcc_acc[key].push_back(d.pcc);
            psnr_acc[key].push_back(d.psnr);
            report.detail.push_back(std::move(d));
        }
    }

    std::sort(report.detail.begin(), report.detail.end(),
              [](const BeatDetail& a, const BeatDetail& b) {
                  return std::tie(a.label, a.beat_id) < std::tie(b.label, b.beat_id);
              });

    for (Split split : {Split::train, Split::test}) {
        for (const std::string label : {"Noisy", "Filtered", "VAE"}) {
            const auto key = std::make_pair(split, label);
            const auto it = rmse_acc.find(key);
            if (it == rmse_acc.end()) continue;
            ReportRow row;
            row.split = split;
            row.label = label;
            row.count = it->second.size();
            row.rmse = aggregate(it->second);
            row.pcc = aggregate(pcc_acc[key]);
            row.psnr = aggregate(psnr_acc[key]);
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["noise_plan"] = noise_plan_desc;
    j["psnr_as_printed"] = psnr_as_printed;
    j["rows"] = nlohmann::json::array();
    for (const ReportRow& r : rows) {
        j["rows"].push_back({{"split", to_string(r.split)},
                             {"label", r.label},
                             {"count", r.count},
                             {"rmse_mean", metric_to_json(r.rmse.mean)},
                             {"rmse_std", metric_to_json(r.rmse.stddev)},
                             {"pcc_mean", metric_to_json(r.pcc.mean)},
                             {"pcc_std", metric_to_json(r.pcc.stddev)},
                             {"psnr_mean", metric_to_json(r.psnr.mean)},
                             {"psnr_std", metric_to_json(r.psnr.stddev)}});
    }
    j["detail"] = nlohmann::json::array();
    for (const BeatDetail& d : detail) {
        j["detail"].push_back({{"beat_id", d.beat_id},
                               {"split", to_string(d.split)},
                               {"label", d.label},
                               {"rmse", metric_to_json(d.rmse)},
                               {"pcc", metric_to_json(d.pcc)},
                               {"psnr", metric_to_json(d.psnr)}});
    }
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    r.config_hash = j.value("config_hash", "");
    r.noise_plan_desc = j.value("noise_plan", "");
    r.psnr_as_printed = j.value("psnr_as_printed", false);
    for (const auto& e : j.at("rows")) {
        ReportRow row;
        row.split = split_from_string(e.at("split").get<std::string>());
        row.label = e.at("label").get<std::string>();
        row.count = e.at("count").get<std::size_t>();
        row.rmse = {metric_from_json(e.at("rmse_mean")), metric_from_json(e.at("rmse_std"))};
        row.pcc = {metric_from_json(e.at("pcc_mean")), metric_from_json(e.at("pcc_std"))};
        row.psnr = {metric_from_json(e.at("psnr_mean")), metric_from_json(e.at("psnr_std"))};
        r.rows.push_back(std::move(row));
    }
    for (const auto& e : j.at("detail")) {
        BeatDetail d;
        d.beat_id = e.at("beat_id").get<std::string>();
        d.split = split_from_string(e.at("split").get<std::string>());
        d.label = e.at("label").get<std::string>();
        d.rmse = metric_from_json(e.at("rmse"));
        d.pcc = metric_from_json(e.at("pcc"));
        d.psnr = metric_from_json(e.at("psnr"));
        r.detail.push_back(std::move(d));
    }
    return r;
}

void emit_report(const EvalReport& report, const std::string& json_path,
                 const std::string& csv_path) {
    {
        std::ofstream out(json_path, std::ios::binary);
        if (!out) throw Error(ErrorKind::data, "cannot open '" + json_path + "'");
        out << report.to_json().dump(2) << '\n';
    }
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error(ErrorKind::data, "cannot open '" + csv_path + "'");
    out << "split,label,count,rmse_mean,rmse_std,pcc_mean,pcc_std,psnr_mean,psnr_std\n";
    char buf[64];
    for (const ReportRow& r : report.rows) {
        out << to_string(r.split) << ',' << r.label << ',' << r.count;
        for (double v : {r.rmse.mean, r.rmse.stddev, r.pcc.mean, r.pcc.stddev, r.psnr.mean,
                         r.psnr.stddev}) {
            if (std::isinf(v)) {
                out << (v > 0 ? ",inf" : ",-inf");
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << ',' << buf;
            }
        }
        out << '\n';
    }
}

EvalReport read_report(const std::string& json_path) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw Error(ErrorKind::data, "cannot open '" + json_path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, "report JSON: " + std::string(e.what()));
    }
    return EvalReport::from_json(j);
}

void emit_plot_data(const Dataset& clean, const Dataset& noisy, const Dataset& filtered,
                    const Dataset& vae, const std::string& beat_id, const std::string& path) {
    const auto find = [&beat_id](const Dataset& ds, const char* name) -> const Beat& {
        for (const Record& r : ds.records()) {
            if (r.beat.beat_id == beat_id) return r.beat;
        }
        throw AlignmentError("beat_id " + beat_id + " not in " + name + " set");
    };
    const Beat& c = find(clean, "clean");
    const Beat& n = find(noisy, "noisy");
    const Beat& f = find(filtered, "filtered");
    const Beat& v = find(vae, "vae");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::data, "cannot open '" + path + "'");
    out << "clean,noisy,filtered,vae\n";
    char buf[64];
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
        const double vals[4] = {c.samples[i], n.samples[i], f.samples[i], v.samples[i]};
        for (int k = 0; k < 4; ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", vals[k]);
            out << (k ? "," : "") << buf;
        }
        out << '\n';
    }
}

} // namespace mapden
