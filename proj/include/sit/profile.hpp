#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sit {

/// Per-time loss table L_t: piecewise constant over contiguous bins,
/// clamped to the first/last bin outside its range.
class LossProfile {
public:
    LossProfile() = default;
    /// edges.size() == values.size() + 1, edges strictly increasing.
    LossProfile(std::vector<double> edges, std::vector<double> values);

    double operator()(double t) const;

    const std::vector<double>& edges() const noexcept { return edges_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t bins() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    /// Text format: `# sit-profile v1 bins=<K>` then one `t_lo t_hi L` row per bin.
    void write(std::ostream& out) const;
    static LossProfile read(std::istream& in);
    static LossProfile load(const std::string& path);

private:
    std::vector<double> edges_;
    std::vector<double> values_;
};

} // namespace sit
