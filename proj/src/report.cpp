#include "tissueseg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tissueseg/errors.hpp"

namespace tseg {

using nlohmann::json;

namespace {

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v, int digits = 3)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string setting_columns(const MetricsBundle& b, const Setting& s)
{
    return std::string(to_string(s.family)) + "," + std::string(to_string(s.dim)) + "," +
           std::string(to_string(s.overlap_train)) + "," + std::string(to_string(s.overlap_test)) + "," +
           csv_field(s.modalities_label(b.modality_tags));
}

json setting_json(const MetricsBundle& b, std::size_t i)
{
    const Setting& s = b.settings[i];
    return {{"index", i},
            {"label", s.label(b.modality_tags)},
            {"family", to_string(s.family)},
            {"dim", to_string(s.dim)},
            {"overlap_train", to_string(s.overlap_train)},
            {"overlap_test", to_string(s.overlap_test)},
            {"modalities", s.modalities_label(b.modality_tags)},
            {"group", s.group}};
}

/// Linear-interpolated quantile of sorted values.
double quantile(const std::vector<double>& v, double q)
{
    if (v.size() == 1) return v[0];
    const double pos = q * double(v.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("failed writing " + path.string());
}

} // namespace

std::vector<SummaryRow> summarize(const MetricsBundle& bundle)
{
    std::vector<SummaryRow> out;
    for (std::size_t s = 0; s < bundle.settings.size(); ++s)
        for (Tissue t : kTissues) {
            std::vector<double> v;
            for (const auto& r : bundle.rows)
                if (r.setting == s && r.cls == t) v.push_back(r.dsc);
            if (v.empty()) continue;
            SummaryRow row{s, t, v.size(), 0.0, 0.0};
            for (double x : v) row.mean += x;
            row.mean /= double(v.size());
            if (v.size() > 1) {
                double ss = 0.0;
                for (double x : v) ss += (x - row.mean) * (x - row.mean);
                row.std = std::sqrt(ss / double(v.size() - 1));
            }
            out.push_back(row);
        }
    return out;
}

std::string metrics_csv(const MetricsBundle& bundle)
{
    std::string out = "case_id,family,dim,overlap_train,overlap_test,modalities,class,dsc\n";
    for (const auto& r : bundle.rows)
        out += csv_field(r.case_id) + "," + setting_columns(bundle, bundle.settings.at(r.setting)) + "," +
               std::string(to_string(r.cls)) + "," + fmt(r.dsc) + "\n";
    return out;
}

std::string summary_csv(const MetricsBundle& bundle)
{
    std::string out = "family,dim,overlap_train,overlap_test,modalities,class,n,mean,std\n";
    for (const auto& s : summarize(bundle))
        out += setting_columns(bundle, bundle.settings[s.setting]) + "," + std::string(to_string(s.cls)) + "," +
               std::to_string(s.n) + "," + fmt(s.mean) + "," + fmt(s.std) + "\n";
    return out;
}

json summary_json(const MetricsBundle& bundle)
{
    json j;
    j["study"] = to_string(bundle.config.study);
    j["significance_level"] = kSignificanceLevel;
    j["alternative"] = to_string(bundle.config.sided);
    j["settings"] = json::array();
    for (std::size_t i = 0; i < bundle.settings.size(); ++i) j["settings"].push_back(setting_json(bundle, i));
    for (const auto& s : summarize(bundle)) {
        auto& entry = j["settings"][s.setting]["per_class"][std::string(to_string(s.cls))];
        entry = {{"n", s.n}, {"mean", s.mean}, {"std", s.std},
                 {"text", fmt_short(s.mean) + " ± " + fmt_short(s.std)}};
    }
    j["comparisons"] = json::array();
    for (const auto& c : bundle.comparisons) {
        // the marker goes to the setting with the higher mean
        const bool sig = c.significant();
        j["comparisons"].push_back({{"a", bundle.settings[c.a].label(bundle.modality_tags)},
                                    {"b", bundle.settings[c.b].label(bundle.modality_tags)},
                                    {"class", to_string(c.cls)},
                                    {"mean_a", c.mean_a},
                                    {"mean_b", c.mean_b},
                                    {"wilcoxon", to_json(c.test)},
                                    {"significant", sig},
                                    {"marker", sig ? "*" : ""},
                                    {"better", sig ? (c.mean_a > c.mean_b ? "a" : "b") : ""}});
    }
    return j;
}

std::string dsc_boxplot_svg(const MetricsBundle& bundle)
{
    const std::size_t ns = bundle.settings.size();
    const double box_w = 18, gap = 10, margin_l = 50, margin_t = 30, plot_h = 240, margin_b = 150;
    const double panel_w = double(ns) * (box_w + gap) + gap;
    const double width = margin_l + 3 * (panel_w + 20) + 10;
    const double height = margin_t + plot_h + margin_b;
    auto ypos = [&](double v) { return margin_t + (1.0 - v) * plot_h; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};
    int panel = 0;
    for (Tissue t : kTissues) {
        const double x0 = margin_l + panel * (panel_w + 20);
        os << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << margin_t - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
           << to_string(t) << "</text>\n";
        os << "<rect x=\"" << x0 << "\" y=\"" << margin_t << "\" width=\"" << panel_w << "\" height=\"" << plot_h
           << "\" fill=\"none\" stroke=\"#999\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double v = k / 4.0;
            os << "<line x1=\"" << x0 << "\" x2=\"" << x0 + panel_w << "\" y1=\"" << ypos(v) << "\" y2=\"" << ypos(v)
               << "\" stroke=\"#eee\"/>\n";
            if (panel == 0)
                os << "<text x=\"" << x0 - 5 << "\" y=\"" << ypos(v) + 3 << "\" text-anchor=\"end\">" << fmt_short(v, 2)
                   << "</text>\n";
        }
        for (std::size_t s = 0; s < ns; ++s) {
            std::vector<double> v;
            for (const auto& r : bundle.rows)
                if (r.setting == s && r.cls == t) v.push_back(r.dsc);
            const double cx = x0 + gap + double(s) * (box_w + gap) + box_w / 2;
            const char* col = colors[s % 8];
            if (!v.empty()) {
                std::sort(v.begin(), v.end());
                const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
                const double iqr = q3 - q1;
                const double lo = *std::find_if(v.begin(), v.end(), [&](double x) { return x >= q1 - 1.5 * iqr; });
                const double hi = *std::find_if(v.rbegin(), v.rend(), [&](double x) { return x <= q3 + 1.5 * iqr; });
                os << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << ypos(hi) << "\" y2=\"" << ypos(lo)
                   << "\" stroke=\"" << col << "\"/>\n";
                os << "<rect x=\"" << cx - box_w / 2 << "\" y=\"" << ypos(q3) << "\" width=\"" << box_w
                   << "\" height=\"" << std::max(0.5, ypos(q1) - ypos(q3)) << "\" fill=\"" << col
                   << "\" fill-opacity=\"0.5\" stroke=\"" << col << "\"/>\n";
                os << "<line x1=\"" << cx - box_w / 2 << "\" x2=\"" << cx + box_w / 2 << "\" y1=\"" << ypos(q2)
                   << "\" y2=\"" << ypos(q2) << "\" stroke=\"black\"/>\n";
                for (double x : v)
                    if (x < lo || x > hi)
                        os << "<circle cx=\"" << cx << "\" cy=\"" << ypos(x) << "\" r=\"2\" fill=\"none\" stroke=\"" << col
                           << "\"/>\n";
            }
            const double ly = margin_t + plot_h + 8;
            os << "<text x=\"" << cx << "\" y=\"" << ly << "\" transform=\"rotate(60 " << cx << " " << ly
               << ")\">" << xml_escape(bundle.settings[s].label(bundle.modality_tags)) << "</text>\n";
        }
        ++panel;
    }
    os << "</svg>\n";
    return os.str();
}

void emit_report(const MetricsBundle& bundle, const std::filesystem::path& dir)
{
    if (bundle.rows.empty() || bundle.settings.empty())
        throw std::invalid_argument("emit_report: bundle holds no metrics");
    const std::string metrics = metrics_csv(bundle);
    const std::string summary = summary_csv(bundle);
    const std::string sjson = summary_json(bundle).dump(2) + "\n";
    const std::string svg = dsc_boxplot_svg(bundle);

    std::error_code ec;
    std::filesystem::create_directories(dir / "plots", ec);
    if (!ec) std::filesystem::create_directories(dir / "provenance", ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    write_file(dir / "metrics.csv", metrics);
    write_file(dir / "summary.csv", summary);
    write_file(dir / "summary.json", sjson);
    write_file(dir / "plots" / "dsc_boxplot.svg", svg);
    for (const auto& [name, doc] : bundle.provenance) write_file(dir / "provenance" / (name + ".json"), doc.dump(2) + "\n");
}

} // namespace tseg
