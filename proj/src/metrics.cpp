#include "tissueseg/metrics.hpp"

#include "tissueseg/errors.hpp"

namespace tseg {

double dice(const LabelMap& gt, const LabelMap& seg, int class_id)
{
    if (gt.dims() != seg.dims())
        throw DimensionMismatchError("dice: ground truth " + to_string(gt.dims()) + " vs segmentation " +
                                     to_string(seg.dims()));
    if (class_id < 1 || class_id >= kNumClasses) throw std::invalid_argument("dice: class_id must be 1, 2 or 3");
    std::size_t g = 0, s = 0, both = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool a = gt[i] == class_id, b = seg[i] == class_id;
        g += a;
        s += b;
        both += a && b;
    }
    if (g + s == 0) return 1.0;
    return 2.0 * double(both) / double(g + s);
}

DSCResult evaluate_case(const LabelMap& gt, const LabelMap& seg, const std::string& case_id)
{
    DSCResult r{case_id, {}};
    for (Tissue t : kTissues) r.per_class[t] = dice(gt, seg, int(t));
    return r;
}

} // namespace tseg
