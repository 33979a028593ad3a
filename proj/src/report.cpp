#include <fstream>
#include <iomanip>
#include <sstream>

#include "nucsel/pipeline.hpp"

namespace fs = std::filesystem;

namespace nucsel {
namespace {

struct Series {
    std::string name;
    std::string color;
    std::vector<double> values;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(precision) << v;
    return ss.str();
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Grouped bar chart; every bar carries its value as data-value and a label.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<Series>& series) {
    const int group_width = 24 * static_cast<int>(series.size()) + 16;
    const int left = 60, top = 40, plot_h = 240;
    const int width = left + group_width * static_cast<int>(std::max<std::size_t>(categories.size(), 1)) + 160;
    const int height = top + plot_h + 80;

    double vmax = 0;
    for (const auto& s : series) {
        for (double v : s.values) vmax = std::max(vmax, v);
    }
    if (vmax <= 0) vmax = 1;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    svg << "  <text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << escape_xml(title)
        << "</text>\n";
    svg << "  <line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - 150 << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "  <text x=\"4\" y=\"" << top + 4 << "\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(vmax)
        << "</text>\n";

    for (std::size_t c = 0; c < categories.size(); ++c) {
        const int gx = left + 8 + static_cast<int>(c) * group_width;
        for (std::size_t k = 0; k < series.size(); ++k) {
            const double v = series[k].values.at(c);
            const int h = static_cast<int>(std::lround(v / vmax * plot_h));
            const int x = gx + static_cast<int>(k) * 24;
            svg << "  <rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"20\" height=\"" << h
                << "\" fill=\"" << series[k].color << "\" data-series=\"" << escape_xml(series[k].name)
                << "\" data-category=\"" << escape_xml(categories[c]) << "\" data-value=\"" << fmt(v, 6) << "\"/>\n";
            svg << "  <text x=\"" << x << "\" y=\"" << top + plot_h - h - 3
                << "\" font-family=\"sans-serif\" font-size=\"8\">" << fmt(v, 3) << "</text>\n";
        }
        svg << "  <text x=\"" << gx << "\" y=\"" << top + plot_h + 16 << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << escape_xml(categories[c]) << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const int ly = top + 16 * static_cast<int>(k);
        svg << "  <rect x=\"" << width - 140 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
            << series[k].color << "\"/>\n";
        svg << "  <text x=\"" << width - 124 << "\" y=\"" << ly + 9 << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << escape_xml(series[k].name) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace

ReportSummary report(const fs::path& run_dir) {
    const fs::path manifest_path = run_dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw Error("incomplete run: no manifest.json in " + run_dir.string() +
                    "; missing stages: crop, features, cluster, select");
    }
    const nlohmann::json manifest = read_json(manifest_path);

    auto stage_ok = [&](const std::string& name) {
        for (const auto& s : manifest.value("stages", nlohmann::json::array())) {
            if (s.value("name", "") == name && s.value("status", "") == "ok") return true;
        }
        return false;
    };
    std::vector<std::string> missing;
    for (const char* required : {"crop", "features", "cluster", "select"}) {
        if (!stage_ok(required)) missing.emplace_back(required);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw Error("incomplete run: missing stages: " + list);
    }

    const fs::path dir = run_dir / "report";
    fs::create_directories(dir);
    ReportSummary summary;

    const SelectionReport rep = selection_from_json(read_json(run_dir / "selection.json"));
    std::ostringstream sel;
    sel << std::setprecision(17) << "cluster,image_id,x,y,s,d1,d2,d3,total,score,largest_fine_cluster,largest_fine_size,members\n";
    std::vector<std::string> categories;
    Series d1{"d1 coarse", "#4e79a7", {}}, d2{"d2 fine", "#f28e2b", {}}, d3{"d3 consistency", "#59a14f", {}};
    for (const auto& c : rep.clusters) {
        const auto& r = c.chosen();
        sel << c.cluster << ',' << r.patch.image_id << ',' << r.patch.x << ',' << r.patch.y << ',' << r.patch.s << ','
            << r.terms.d1 << ',' << r.terms.d2 << ',' << r.terms.d3 << ',' << r.terms.total << ',' << r.score << ','
            << c.largest_fine << ',' << c.largest_fine_size << ',' << c.ranking.size() << '\n';
        categories.push_back("k" + std::to_string(c.cluster));
        d1.values.push_back(r.terms.d1);
        d2.values.push_back(r.terms.d2);
        d3.values.push_back(r.terms.d3);
    }
    write_text(dir / "selection.csv", sel.str());
    write_text(dir / "terms.csv", terms_csv(rep));
    write_text(dir / "terms.svg",
               bar_chart_svg(std::string("Criterion terms of selected patches (") + to_string(rep.ablation) + ")",
                             categories, {d1, d2, d3}));
    summary.files = {dir / "selection.csv", dir / "terms.csv", dir / "terms.svg"};

    std::ostringstream text;
    text << "selected patches: " << rep.clusters.size() << " (ablation " << to_string(rep.ablation) << ")\n";
    for (const auto& c : rep.clusters) {
        const auto& r = c.chosen();
        text << "  cluster " << c.cluster << ": " << r.patch.image_id << " at (" << r.patch.x << ", " << r.patch.y
             << ") s=" << r.patch.s << " total=" << fmt(r.terms.total, 6) << "\n";
    }

    if (stage_ok("eval") && fs::exists(run_dir / "metrics.csv")) {
        summary.has_metrics = true;
        const auto aji_col = read_metric_column(run_dir / "metrics.csv", "aji");
        const auto dice_col = read_metric_column(run_dir / "metrics.csv", "dice");
        std::ostringstream csv;
        csv << std::setprecision(17) << "image,aji,dice\n";
        Series a{"AJI", "#4e79a7", {}}, d{"Dice", "#e15759", {}};
        std::vector<std::string> images;
        double aji_sum = 0, dice_sum = 0;
        for (const auto& [name, v] : aji_col) {
            csv << name << ',' << v << ',' << dice_col.at(name) << '\n';
            images.push_back(name);
            a.values.push_back(v);
            d.values.push_back(dice_col.at(name));
            aji_sum += v;
            dice_sum += dice_col.at(name);
        }
        write_text(dir / "metrics.csv", csv.str());
        write_text(dir / "metrics.svg", bar_chart_svg("Per-image segmentation metrics", images, {a, d}));
        summary.files.push_back(dir / "metrics.csv");
        summary.files.push_back(dir / "metrics.svg");
        const double n = static_cast<double>(std::max<std::size_t>(images.size(), 1));
        text << "evaluated images: " << images.size() << ", mean AJI " << fmt(aji_sum / n, 6) << ", mean Dice "
             << fmt(dice_sum / n, 6) << "\n";
    } else {
        text << "no evaluation performed\n";
    }
    write_text(dir / "summary.txt", text.str());
    summary.files.push_back(dir / "summary.txt");
    return summary;
}

}  // namespace nucsel
