#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tissueseg/volume.hpp"

namespace tseg {

/// 2|G∩S| / (|G| + |S|) for one class; 1.0 when both masks are empty.
/// Throws DimensionMismatchError on differing shapes.
double dice(const LabelMap& gt, const LabelMap& seg, int class_id);

struct DSCResult {
    std::string case_id;
    std::map<Tissue, double> per_class;
};

/// Dice for CSF, GM and WM.
DSCResult evaluate_case(const LabelMap& gt, const LabelMap& seg, const std::string& case_id = {});

template <class T>
struct Fold {
    std::vector<T> train;
    T test;
};

/// Fold i tests on item i and trains on the rest.
template <class T>
std::vector<Fold<T>> loocv_folds(const std::vector<T>& items)
{
    if (items.size() < 3) throw std::invalid_argument("loocv_folds: need at least three cases");
    std::vector<Fold<T>> folds;
    folds.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        Fold<T> f{{}, items[i]};
        for (std::size_t j = 0; j < items.size(); ++j)
            if (j != i) f.train.push_back(items[j]);
        folds.push_back(std::move(f));
    }
    return folds;
}

} // namespace tseg
