#pragma once

#include "melai/elman.hpp"
#include "melai/morphogen.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string_view>

namespace melai::archive {

struct ArchiveCell {
    control::ElmanController controller;
    double task_performance = 0.0;
    int generation_inserted = 0;
    int generation_updated = 0;
};

enum class UpdateResult { Inserted, Replaced, Kept };

std::string_view to_string(UpdateResult r);

struct ArchiveStats {
    std::size_t count = 0;
    std::optional<double> mean;
    std::optional<double> best;
};

/// Best controller per robot type. A cell is replaced only by a strictly
/// better task performance.
class ControllerArchive {
public:
    /// Exact match on the full type tuple; returns a copy.
    std::optional<control::ElmanController> lookup(const morph::RobotType& type) const;
    const ArchiveCell* cell(const morph::RobotType& type) const;

    /// Throws StructuralError when the controller was built for another type.
    UpdateResult update(const morph::RobotType& type, const control::ElmanController& controller,
                        double task_performance, int generation);

    /// Places a cell verbatim; used when loading a checkpoint.
    void restore(const morph::RobotType& type, ArchiveCell cell);

    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }
    const std::map<morph::RobotType, ArchiveCell>& cells() const { return cells_; }
    ArchiveStats stats() const;

    /// Number of lookup() calls so far.
    std::size_t lookup_count() const { return lookups_; }

private:
    std::map<morph::RobotType, ArchiveCell> cells_;
    mutable std::size_t lookups_ = 0;
};

/// 1 - |f_c - f_l|.
double compatibility(double f_c, double f_l);

void write_archive(std::ostream& os, const ControllerArchive& archive);
ControllerArchive read_archive(std::istream& is);

} // namespace melai::archive
