#pragma once

// The ten-source / five-state capitals example and the inputs used to check
// the index, bound and incremental traces against it.

#include <copydet/model.hpp>

#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fixtures {

using namespace copydet;

inline const char* capitals_csv()
{
    return "source_id,item_id,value\n"
           "S0,NJ,Trenton\nS0,AZ,Phoenix\nS0,NY,Albany\nS0,TX,Austin\n"
           "S1,NJ,Trenton\nS1,AZ,Phoenix\nS1,NY,Albany\nS1,FL,Orlando\nS1,TX,Austin\n"
           "S2,NJ,Atlantic\nS2,AZ,Phoenix\nS2,NY,NewYork\nS2,FL,Miami\nS2,TX,Houston\n"
           "S3,NJ,Atlantic\nS3,AZ,Phoenix\nS3,NY,NewYork\nS3,FL,Miami\nS3,TX,Arlington\n"
           "S4,NJ,Atlantic\nS4,AZ,Phoenix\nS4,NY,NewYork\nS4,FL,Orlando\nS4,TX,Houston\n"
           "S5,NJ,Union\nS5,AZ,Tempe\nS5,NY,Albany\nS5,FL,Orlando\nS5,TX,Austin\n"
           "S6,AZ,Tempe\nS6,NY,Buffalo\nS6,FL,PalmBay\nS6,TX,Dallas\n"
           "S7,NJ,Trenton\nS7,NY,Buffalo\nS7,FL,PalmBay\nS7,TX,Dallas\n"
           "S8,NJ,Trenton\nS8,AZ,Tucson\nS8,NY,Buffalo\nS8,FL,PalmBay\nS8,TX,Dallas\n"
           "S9,NJ,Trenton\nS9,FL,Orlando\nS9,TX,Austin\n";
}

inline Dataset capitals()
{
    std::istringstream in(capitals_csv());
    return load_dataset(in);
}

/// Converged accuracies.
inline std::map<std::string, double> converged_accuracy()
{
    return {{"S0", .99}, {"S1", .99}, {"S2", .2}, {"S3", .2},  {"S4", .4},
            {"S5", .6},  {"S6", .01}, {"S7", .25}, {"S8", .2}, {"S9", .99}};
}

/// Converged probabilities of the multi-provider values.
inline std::map<std::string, double> converged_probs()
{
    return {{"AZ.Tempe", .02},   {"NJ.Atlantic", .01}, {"TX.Houston", .02}, {"NY.NewYork", .02},
            {"TX.Dallas", .02},  {"NY.Buffalo", .04},  {"FL.PalmBay", .05}, {"FL.Miami", .03},
            {"AZ.Phoenix", .95}, {"NJ.Trenton", .97},  {"FL.Orlando", .92}, {"NY.Albany", .94},
            {"TX.Austin", .96}};
}

/// Table order of the index built from the converged inputs.
inline std::vector<std::pair<std::string, double>> converged_index()
{
    return {{"AZ.Tempe", 4.59},   {"NJ.Atlantic", 4.12}, {"TX.Houston", 4.05}, {"NY.NewYork", 4.05},
            {"TX.Dallas", 3.98},  {"NY.Buffalo", 3.97},  {"FL.PalmBay", 3.97}, {"FL.Miami", 3.83},
            {"AZ.Phoenix", 1.62}, {"NJ.Trenton", 1.51},  {"FL.Orlando", 0.84}, {"NY.Albany", 0.43},
            {"TX.Austin", 0.43}};
}

/// Round-1 and round-2 inputs for the five sources of the incremental trace;
/// S5-S9 keep their converged accuracies and the other values keep their
/// converged probabilities.
inline std::map<std::string, double> round1_accuracy()
{
    auto a = converged_accuracy();
    a["S0"] = .75;
    a["S1"] = .98;
    a["S2"] = .38;
    a["S3"] = .38;
    a["S4"] = .58;
    return a;
}

inline std::map<std::string, double> round2_accuracy()
{
    auto a = converged_accuracy();
    a["S0"] = .94;
    a["S1"] = .99;
    a["S2"] = .23;
    a["S3"] = .23;
    a["S4"] = .43;
    return a;
}

inline std::map<std::string, double> round1_probs()
{
    auto p = converged_probs();
    p["TX.Houston"] = .04;
    p["FL.Miami"] = .05;
    p["NJ.Atlantic"] = .07;
    p["NY.Albany"] = .07;
    p["NJ.Trenton"] = .90;
    p["NY.NewYork"] = .84;
    p["AZ.Phoenix"] = .94;
    p["FL.Orlando"] = .90;
    p["TX.Austin"] = .90;
    return p;
}

inline std::map<std::string, double> round2_probs()
{
    auto p = converged_probs();
    p["TX.Houston"] = .03;
    p["FL.Miami"] = .03;
    p["NJ.Atlantic"] = .03;
    p["NY.Albany"] = .77;
    p["NJ.Trenton"] = .95;
    p["NY.NewYork"] = .16;
    p["AZ.Phoenix"] = .95;
    p["FL.Orlando"] = .92;
    p["TX.Austin"] = .93;
    return p;
}

/// Value probabilities from "ITEM.Value" keys; values not listed get `rest`.
inline ValueProbs probs_from(const Dataset& d, const std::map<std::string, double>& named, double rest = 0.01)
{
    ValueProbs p(d, rest);
    for (ItemId i = 0; i < d.item_count(); ++i) {
        for (ValueId v = 0; v < d.value_count(i); ++v) {
            auto it = named.find(d.item_name(i) + "." + d.value_name(i, v));
            if (it != named.end()) {
                p(i, v) = it->second;
            }
        }
    }
    return p;
}

inline SourceStats stats_from(const Dataset& d, const std::map<std::string, double>& acc)
{
    std::vector<double> a(d.source_count());
    for (SourceId s = 0; s < d.source_count(); ++s) {
        a[s] = acc.at(d.source_name(s));
    }
    return SourceStats::with_accuracy(d, a);
}

inline std::string entry_name(const Dataset& d, ItemId item, ValueId v)
{
    return d.item_name(item) + "." + d.value_name(item, v);
}

inline SourceId src(const Dataset& d, const std::string& name) { return *d.find_source(name); }

}  // namespace fixtures
