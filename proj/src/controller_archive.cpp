#include "melai/controller_archive.hpp"

#include "melai/error.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace melai::archive {

std::string_view to_string(UpdateResult r)
{
    switch (r) {
    case UpdateResult::Inserted: return "inserted";
    case UpdateResult::Replaced: return "replaced";
    case UpdateResult::Kept: return "kept";
    }
    return "unknown";
}

std::optional<control::ElmanController> ControllerArchive::lookup(const morph::RobotType& type) const
{
    ++lookups_;
    auto it = cells_.find(type);
    if (it == cells_.end())
        return std::nullopt;
    return it->second.controller;
}

const ArchiveCell* ControllerArchive::cell(const morph::RobotType& type) const
{
    auto it = cells_.find(type);
    return it == cells_.end() ? nullptr : &it->second;
}

UpdateResult ControllerArchive::update(const morph::RobotType& type,
                                       const control::ElmanController& controller,
                                       double task_performance, int generation)
{
    if (controller.type() != type)
        throw StructuralError("archive: controller topology does not match the cell type");
    if (!std::isfinite(task_performance))
        throw Error("archive: task performance must be finite");
    auto it = cells_.find(type);
    if (it == cells_.end()) {
        cells_.emplace(type, ArchiveCell{controller, task_performance, generation, generation});
        return UpdateResult::Inserted;
    }
    if (task_performance > it->second.task_performance) {
        it->second.controller = controller;
        it->second.task_performance = task_performance;
        it->second.generation_updated = generation;
        return UpdateResult::Replaced;
    }
    return UpdateResult::Kept;
}

void ControllerArchive::restore(const morph::RobotType& type, ArchiveCell cell)
{
    if (cell.controller.type() != type)
        throw StructuralError("archive: controller topology does not match the cell type");
    cells_.insert_or_assign(type, std::move(cell));
}

ArchiveStats ControllerArchive::stats() const
{
    ArchiveStats s;
    s.count = cells_.size();
    if (cells_.empty())
        return s;
    double sum = 0.0;
    double best = cells_.begin()->second.task_performance;
    for (const auto& [type, c] : cells_) {
        sum += c.task_performance;
        best = std::max(best, c.task_performance);
    }
    s.mean = sum / static_cast<double>(cells_.size());
    s.best = best;
    return s;
}

double compatibility(double f_c, double f_l) { return 1.0 - std::abs(f_c - f_l); }

void write_archive(std::ostream& os, const ControllerArchive& archive)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "archive 1\ncells " << archive.size() << '\n';
    for (const auto& [type, c] : archive.cells()) {
        out << "cell " << type.num_sensors << ' ' << type.num_wheels << ' ' << type.num_joints << ' '
            << c.task_performance << ' ' << c.generation_inserted << ' ' << c.generation_updated << '\n';
        control::write_controller(out, c.controller);
    }
    os << out.str();
}

ControllerArchive read_archive(std::istream& is)
{
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "archive" || version != 1)
        throw ParseError("expected 'archive 1' header");
    std::size_t count = 0;
    if (!(is >> tag >> count) || tag != "cells")
        throw ParseError("expected 'cells n'");
    ControllerArchive archive;
    for (std::size_t i = 0; i < count; ++i) {
        morph::RobotType t;
        double f = 0.0;
        int inserted = 0;
        int updated = 0;
        if (!(is >> tag >> t.num_sensors >> t.num_wheels >> t.num_joints >> f >> inserted >> updated) ||
            tag != "cell")
            throw ParseError("malformed archive cell record");
        archive.restore(t, ArchiveCell{control::read_controller(is), f, inserted, updated});
    }
    return archive;
}

} // namespace melai::archive
