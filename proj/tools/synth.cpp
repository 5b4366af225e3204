// Writes synthetic data files in the NSL-KDD, CIC-IDS-2017 and UNSW-NB15 formats.

#include "ensembleguard/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace syn = ensembleguard::synthetic;

int main(int argc, char** argv) {
    CLI::App app{"Synthetic intrusion-detection data"};
    std::string dataset;
    std::string out;
    syn::Options opt;
    std::size_t files = 2;
    app.add_option("dataset", dataset, "nsl-kdd, cic-ids-2017 or unsw-nb15")
        ->required()
        ->check(CLI::IsMember({"nsl-kdd", "cic-ids-2017", "unsw-nb15"}));
    app.add_option("out", out, "output file (directory for cic-ids-2017)")->required();
    app.add_option("--seed", opt.seed, "generator seed");
    app.add_option("--scale", opt.scale, "row count multiplier")->check(CLI::PositiveNumber);
    app.add_option("--overlap", opt.overlap, "share of records drawn from another class")->check(CLI::Range(0.0, 1.0));
    app.add_option("--files", files, "number of CIC-IDS-2017 files")->check(CLI::PositiveNumber);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (dataset == "nsl-kdd") {
            std::cout << syn::write_nslkdd(out, opt).string() << "\n";
        } else if (dataset == "unsw-nb15") {
            std::cout << syn::write_unswnb15(out, opt).string() << "\n";
        } else {
            for (const auto& p : syn::write_cicids2017(out, opt, files)) std::cout << p.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
