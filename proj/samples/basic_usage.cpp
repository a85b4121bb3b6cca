// Loads a claims file, runs iterative detection and prints the copying pairs
// and the chosen value per item.

#include <copydet/fusion.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv)
{
    using namespace copydet;
    const char* path = argc > 1 ? argv[1] : "motivating_example.csv";
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return 2;
    }
    auto d = load_dataset(in);

    ModelParams prm;  // alpha .1, s .8, n 50
    IterativeOptions opt;
    opt.detector = Algorithm::index;
    auto r = run_iterative(d, prm, opt);

    std::cout << "converged after " << r.rounds.size() << " rounds\n";
    for (auto p : r.report.copying_pairs()) {
        std::cout << d.source_name(p.a) << " ~ " << d.source_name(p.b) << "\n";
    }
    auto top = top_values(d, r.state.probs);
    for (ItemId i = 0; i < d.item_count(); ++i) {
        std::cout << d.item_name(i) << ": " << d.value_name(i, top[i]) << "\n";
    }
    for (SourceId s = 0; s < d.source_count(); ++s) {
        std::cout << d.source_name(s) << " accuracy " << r.state.stats.accuracy[s] << "\n";
    }
}
