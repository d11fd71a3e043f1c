// Generates the synthetic five-market fixture CSVs (canonical 82-column
// schema) used by the demos and integration tests.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "gcpred/fixtures.hpp"

int main(int argc, char** argv) {
    CLI::App app{"write synthetic five-market fixture CSVs"};
    std::string out_dir = "fixtures";
    std::size_t days = 400;
    std::uint64_t seed = 1;
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--days", days, "number of trading days");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(out_dir);
        const auto paths = gcpred::fixtures::write_fixture_set(out_dir, days, seed);
        for (const auto& p : paths) std::cout << "wrote " << p << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
