// Runs the full acceptance suite and prints one PASS/FAIL line per criterion.
// Optional arguments select a subset of criteria by number.

#include "validation.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv)
{
    epigen::app::ValidationOptions options;
    for (int i = 1; i < argc; ++i) {
        options.only.push_back(std::atoi(argv[i]));
    }
    try {
        const auto results = epigen::app::run_validation(options);
        int failed         = 0;
        for (const auto& r : results) {
            std::cout << summary_line(r) << '\n';
            for (const auto& note : r.notes) {
                std::cout << "    " << note << '\n';
            }
            failed += r.pass ? 0 : 1;
        }
        std::cout << results.size() - static_cast<std::size_t>(failed) << "/" << results.size()
                  << " criteria passed" << std::endl;
        return failed == 0 ? 0 : 1;
    }
    catch (const std::exception& e) {
        std::cerr << "acceptance: " << e.what() << std::endl;
        return 2;
    }
}
