#pragma once

#include "sit/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sit {

/// Sample table: header `# d=<dim> n=<count> seed=<seed> nfe=<k>` (plus
/// ` labels=1` when a trailing integer label column is present), then one
/// whitespace-separated row per sample.
struct SampleFile {
    Samples x;
    std::vector<int> labels; // empty when unlabelled
    std::uint64_t seed = 0;
    std::size_t nfe = 0;
};

void write_samples(std::ostream& out, const SampleFile& file);
SampleFile read_samples(std::istream& in);
SampleFile load_samples(const std::string& path);
void save_samples(const std::string& path, const SampleFile& file);

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never sees a partial file.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

} // namespace sit
