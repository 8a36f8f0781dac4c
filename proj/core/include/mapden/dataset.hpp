#ifndef MAPDEN_DATASET_HPP
#define MAPDEN_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mapden/beat.hpp"

namespace mapden {

enum class Split { train, test };
enum class Role { clean, noisy };

std::string to_string(Split s);
std::string to_string(Role r);
Split split_from_string(const std::string& s);
Role role_from_string(const std::string& s);

struct Record {
    Beat beat;
    Split split = Split::train;
    Role role = Role::clean;
};

/// A clean/noisy pair sharing one beat_id. Indices refer to Dataset records.
struct PairedIndex {
    std::size_t clean;
    std::size_t noisy;
};

/// Collection of beats with split tags and optional clean/noisy pairing.
/// beat_id is unique per role; paired records share beat_id across roles.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Record> records);

    const std::vector<Record>& records() const { return records_; }
    std::vector<Record>& records() { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    void push_back(Record r);

    /// Records with the given role, in file order.
    std::vector<const Record*> with_role(Role role) const;

    /// Clean/noisy pairs aligned by beat_id, sorted by beat_id.
    /// Validates that each pair agrees on patient_id and length.
    std::vector<PairedIndex> pairs() const;

    /// Patient ids present in the given split, sorted and deduplicated.
    std::vector<std::string> patients(Split split) const;

    /// Digest of the pipeline configuration that produced this file, if any.
    const std::optional<std::string>& config_hash() const { return config_hash_; }
    void set_config_hash(std::string hash) { config_hash_ = std::move(hash); }

    /// Checks beat_id/role uniqueness, window length, finiteness, and pair
    /// consistency. Throws on violation.
    void validate() const;

private:
    std::vector<Record> records_;
    std::optional<std::string> config_hash_;
};

/// CSV schema: header `beat_id,patient_id,split,role,s0,...,s369`, one row per
/// beat, decimal text with 17 significant digits, LF line endings. An optional
/// leading `# config_hash=<hex>` comment carries the reproducibility stamp.
Dataset read_dataset(const std::string& path);
void write_dataset(const Dataset& dataset, const std::string& path);

} // namespace mapden

#endif
