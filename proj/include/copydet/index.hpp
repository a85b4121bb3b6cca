#pragma once

// Score-ordered inverted index over multi-provider values.

#include <copydet/bayes.hpp>
#include <copydet/csv.hpp>
#include <copydet/model.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace copydet {

/// Largest single-item contribution any ordered pair of the given providers
/// can get from sharing a value with probability `p_true`.
///
/// The same-value score is monotone in each accuracy separately, so the
/// optimum is attained with both sources drawn from the two lowest and two
/// highest accuracies.
/// All ordered pairs among those (at most 12) are evaluated.
inline double max_contribution(double p_true, std::span<const double> accuracies, const ModelParams& prm)
{
    if (accuracies.size() < 2) {
        throw ContractViolation("max_contribution needs at least two providers");
    }
    std::vector<std::size_t> order(accuracies.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return accuracies[x] < accuracies[y] || (accuracies[x] == accuracies[y] && x < y);
    });
    std::size_t cand[4];
    std::size_t nc = 0;
    auto push = [&](std::size_t i) {
        if (std::find(cand, cand + nc, i) == cand + nc) {
            cand[nc++] = i;
        }
    };
    push(order[0]);
    push(order[1]);
    push(order[order.size() - 2]);
    push(order[order.size() - 1]);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nc; ++i) {
        for (std::size_t j = 0; j < nc; ++j) {
            if (i != j) {
                best = std::max(best, score_same_value(p_true, accuracies[cand[i]], accuracies[cand[j]], prm));
            }
        }
    }
    return best;
}

struct IndexEntry {
    ItemId item;
    ValueId value;
    double p_true;
    double score;                     // C(E)
    std::vector<SourceId> providers;  // sorted, at least two
};

class InvertedIndex {
  public:
    static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();

    std::span<const IndexEntry> entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const IndexEntry& operator[](std::size_t i) const { return entries_[i]; }

    /// First position of the tail set.
    std::size_t tail_start() const noexcept { return tail_start_; }
    /// m, the minimum entry score (0 for an empty index).
    double min_score() const noexcept { return min_score_; }
    /// M once entry `pos` has been scanned: the best score still ahead, or m
    /// after the last entry.
    double next_score(std::size_t pos) const { return next_[pos]; }

    /// Position of (item, value), or npos if it has fewer than two providers.
    std::uint32_t position(ItemId item, ValueId value) const { return pos_[item][value]; }

    /// Overwrites one entry's probability and score in place. The order is
    /// not changed; call refresh() afterwards.
    void set_score(std::size_t pos, double p_true, double score)
    {
        entries_[pos].p_true = p_true;
        entries_[pos].score = score;
    }

    /// Recomputes M, m and the tail set for the current (possibly unsorted)
    /// scores.
    void refresh(double theta_ind)
    {
        auto n = entries_.size();
        next_.assign(n, 0.0);
        min_score_ = 0.0;
        if (n != 0) {
            min_score_ = entries_[0].score;
            for (const auto& e : entries_) {
                min_score_ = std::min(min_score_, e.score);
            }
            double run = entries_[n - 1].score;
            next_[n - 1] = min_score_;
            for (std::size_t i = n - 1; i-- > 0;) {
                next_[i] = run;
                run = std::max(run, entries_[i].score);
            }
        }
        tail_start_ = n;
        double sum = 0.0;
        while (tail_start_ > 0 && sum + entries_[tail_start_ - 1].score < theta_ind) {
            sum += entries_[--tail_start_].score;
        }
    }

  private:
    friend InvertedIndex build_index(const Dataset&, const ValueProbs&, const SourceStats&,
                                     const ModelParams&, unsigned);

    std::vector<IndexEntry> entries_;
    std::vector<double> next_;
    std::vector<std::vector<std::uint32_t>> pos_;
    std::size_t tail_start_ = 0;
    double min_score_ = 0.0;
};

/// One entry per value with two or more providers, ordered by score
/// descending. Equal scores order by provider count, then item, then value.
inline InvertedIndex build_index(const Dataset& d, const ValueProbs& probs, const SourceStats& stats,
                                 const ModelParams& prm, unsigned threads = 1)
{
    if (probs.item_count() != d.item_count() || stats.accuracy.size() != d.source_count()) {
        throw ContractViolation("probabilities or accuracies do not match the dataset");
    }
    InvertedIndex idx;
    std::vector<ValueId> counts;
    for (ItemId item = 0; item < d.item_count(); ++item) {
        auto providers = d.providers_of(item);
        counts.assign(d.value_count(item), 0);
        for (const auto& p : providers) {
            ++counts[p.value];
        }
        for (ValueId v = 0; v < counts.size(); ++v) {
            if (counts[v] < 2) {
                continue;
            }
            IndexEntry e{item, v, probs(item, v), 0.0, {}};
            e.providers.reserve(counts[v]);
            for (const auto& p : providers) {
                if (p.value == v) {
                    e.providers.push_back(p.source);
                }
            }
            idx.entries_.push_back(std::move(e));
        }
    }

    auto score_range = [&](std::size_t lo, std::size_t hi) {
        std::vector<double> acc;
        for (std::size_t i = lo; i < hi; ++i) {
            auto& e = idx.entries_[i];
            acc.clear();
            for (auto s : e.providers) {
                acc.push_back(stats.accuracy[s]);
            }
            e.score = max_contribution(e.p_true, acc, prm);
        }
    };
    std::size_t n = idx.entries_.size();
    threads = std::max(1u, threads);
    if (threads == 1 || n < 1024) {
        score_range(0, n);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t lo = 0; lo < n; lo += chunk) {
            pool.emplace_back(score_range, lo, std::min(n, lo + chunk));
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    std::sort(idx.entries_.begin(), idx.entries_.end(), [](const IndexEntry& x, const IndexEntry& y) {
        if (x.score != y.score) {
            return x.score > y.score;
        }
        if (x.providers.size() != y.providers.size()) {
            return x.providers.size() < y.providers.size();
        }
        if (x.item != y.item) {
            return x.item < y.item;
        }
        return x.value < y.value;
    });

    idx.pos_.resize(d.item_count());
    for (ItemId item = 0; item < d.item_count(); ++item) {
        idx.pos_[item].assign(d.value_count(item), InvertedIndex::npos);
    }
    for (std::size_t i = 0; i < n; ++i) {
        idx.pos_[idx.entries_[i].item][idx.entries_[i].value] = static_cast<std::uint32_t>(i);
    }
    idx.refresh(thresholds(prm).theta_ind);
    return idx;
}

/// Debug dump: `item,value,p_true,score,providers` with |-separated providers.
inline void write_index(std::ostream& out, const InvertedIndex& idx, const Dataset& d)
{
    out << "item,value,p_true,score,providers\n";
    for (const auto& e : idx.entries()) {
        std::string providers;
        for (auto s : e.providers) {
            if (!providers.empty()) {
                providers.push_back('|');
            }
            providers += d.source_name(s);
        }
        csv::write_row(out, {d.item_name(e.item), d.value_name(e.item, e.value), csv::format_double(e.p_true),
                             csv::format_double(e.score), providers});
    }
}

}  // namespace copydet
