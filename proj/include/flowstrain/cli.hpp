// cli.hpp - the flowstrain command line, callable in-process.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowstrain/objective.hpp"
#include "flowstrain/report.hpp"
#include "flowstrain/strain.hpp"

namespace flowstrain::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

// Parses argv (argv[0] is the program name), runs one subcommand and returns
// its exit code. Reports go to `out` unless --report is given; diagnostics go to `err`.
int run(const std::vector<std::string> &argv, std::ostream &out, std::ostream &err);
int run(int argc, char **argv);

struct RetestRow {
    std::string patient;
    std::string test;
    std::string retest;
};

// CSV with the exact header "patient,test,retest". Blank lines are skipped.
std::vector<RetestRow> read_retest_csv(const std::filesystem::path &path);

struct RetestOptions {
    DifferenceMode mode = DifferenceMode::Absolute;
    PeakMode peak = PeakMode::SignedMax;
    StrainFrame frame{StrainKind::Lagrangian, CoordSystem::Cylindrical, std::nullopt, AngleConvention::Atan2};
    std::size_t trim = 2;
};

// Numeric rows are used as given; rows naming .rvf files (flow C=3 or strain
// C=9) are reduced to peak strains per diagonal component first.
Json retest_report(const std::vector<RetestRow> &rows, const RetestOptions &opts,
                   const std::filesystem::path &base_dir = {});

}  // namespace flowstrain::cli
