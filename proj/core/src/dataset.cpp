#include "mapden/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mapden/errors.hpp"

namespace mapden {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::string to_string(Role r) { return r == Role::clean ? "clean" : "noisy"; }

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw InvalidParamsError("unknown split '" + s + "'");
}

Role role_from_string(const std::string& s) {
    if (s == "clean") return Role::clean;
    if (s == "noisy") return Role::noisy;
    throw InvalidParamsError("unknown role '" + s + "'");
}

Dataset::Dataset(std::vector<Record> records) : records_(std::move(records)) {
    validate();
}

void Dataset::push_back(Record r) { records_.push_back(std::move(r)); }

std::vector<const Record*> Dataset::with_role(Role role) const {
    std::vector<const Record*> out;
    for (const Record& r : records_) {
        if (r.role == role) out.push_back(&r);
    }
    return out;
}

std::vector<PairedIndex> Dataset::pairs() const {
    std::map<std::string, PairedIndex> by_id;
    std::map<std::string, std::pair<bool, bool>> seen;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const Record& r = records_[i];
        auto& flags = seen[r.beat.beat_id];
        if (r.role == Role::clean) {
            by_id[r.beat.beat_id].clean = i;
            flags.first = true;
        } else {
            by_id[r.beat.beat_id].noisy = i;
            flags.second = true;
        }
    }
    std::vector<PairedIndex> out;
    for (const auto& [id, pair] : by_id) {
        const auto& flags = seen[id];
        if (!flags.first || !flags.second) continue;
        const Record& c = records_[pair.clean];
        const Record& n = records_[pair.noisy];
        if (c.beat.patient_id != n.beat.patient_id) {
            throw AlignmentError("pair " + id + " has differing patient ids");
        }
        if (c.beat.samples.size() != n.beat.samples.size()) {
            throw AlignmentError("pair " + id + " has differing lengths");
        }
        out.push_back(pair);
    }
    return out;
}

std::vector<std::string> Dataset::patients(Split split) const {
    std::set<std::string> ids;
    for (const Record& r : records_) {
        if (r.split == split) ids.insert(r.beat.patient_id);
    }
    return {ids.begin(), ids.end()};
}

void Dataset::validate() const {
    std::set<std::pair<std::string, Role>> keys;
    std::map<std::string, Split> split_by_id;
    for (const Record& r : records_) {
        if (r.beat.samples.size() != kWindowLen) {
            throw ShapeError("beat " + r.beat.beat_id + " has length " +
                             std::to_string(r.beat.samples.size()) + ", expected " +
                             std::to_string(kWindowLen));
        }
        for (double v : r.beat.samples) {
            if (!std::isfinite(v)) {
                throw NonFiniteError("beat " + r.beat.beat_id);
            }
        }
        if (!keys.insert({r.beat.beat_id, r.role}).second) {
            throw AlignmentError("duplicate beat_id/role " + r.beat.beat_id + "/" +
                                 to_string(r.role));
        }
        auto [it, inserted] = split_by_id.try_emplace(r.beat.beat_id, r.split);
        if (!inserted && it->second != r.split) {
            throw AlignmentError("beat_id " + r.beat.beat_id + " tagged with both splits");
        }
    }
    pairs(); // validates pair consistency
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

double parse_sample(const std::string& field, std::size_t line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw ParseError(line_no, "bad numeric field '" + field + "'");
    }
    if (!std::isfinite(value)) {
        throw ParseError(line_no, "non-finite sample '" + field + "'");
    }
    return value;
}

std::string expected_header() {
    std::string h = "beat_id,patient_id,split,role";
    for (std::size_t i = 0; i < kWindowLen; ++i) h += ",s" + std::to_string(i);
    return h;
}

constexpr std::string_view kHashPrefix = "# config_hash=";

} // namespace

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(0, "cannot open '" + path + "'");
    }
    std::string line;
    std::size_t line_no = 0;
    Dataset ds;

    if (!std::getline(in, line)) {
        throw EmptyDatasetError(path);
    }
    ++line_no;
    if (line.rfind(kHashPrefix, 0) == 0) {
        ds.set_config_hash(line.substr(kHashPrefix.size()));
        if (!std::getline(in, line)) {
            throw EmptyDatasetError(path);
        }
        ++line_no;
    }
    if (line != expected_header()) {
        throw ParseError(line_no, "unexpected header");
    }

    bool any = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != 4 + kWindowLen) {
            throw ParseError(line_no, "expected " + std::to_string(4 + kWindowLen) +
                                          " columns, got " + std::to_string(fields.size()));
        }
        Record r;
        r.beat.beat_id = fields[0];
        r.beat.patient_id = fields[1];
        try {
            r.split = split_from_string(fields[2]);
            r.role = role_from_string(fields[3]);
        } catch (const InvalidParamsError& e) {
            throw ParseError(line_no, e.what());
        }
        r.beat.samples.resize(kWindowLen);
        for (std::size_t i = 0; i < kWindowLen; ++i) {
            r.beat.samples[i] = parse_sample(fields[4 + i], line_no);
        }
        ds.push_back(std::move(r));
        any = true;
    }
    if (!any) {
        throw EmptyDatasetError(path);
    }
    ds.validate();
    return ds;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
    if (dataset.empty()) {
        throw EmptyDatasetError("refusing to write empty dataset to " + path);
    }
    dataset.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::data, "cannot open '" + path + "' for writing");
    }
    if (dataset.config_hash()) {
        out << kHashPrefix << *dataset.config_hash() << '\n';
    }
    out << expected_header() << '\n';
    char buf[64];
    for (const Record& r : dataset.records()) {
        out << r.beat.beat_id << ',' << r.beat.patient_id << ',' << to_string(r.split) << ','
            << to_string(r.role);
        for (double v : r.beat.samples) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::data, "write failed for '" + path + "'");
    }
}

} // namespace mapden
