#include "medctx/eval/report.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "medctx/core/csv.hpp"
#include "medctx/core/errors.hpp"
#include "medctx/core/kv_config.hpp"

namespace medctx::eval {
namespace {

template <typename Visitor>
void visit_summary(MetricsReport& r, Visitor&& v) {
  v("dice", r.dice);
  v("iou", r.iou);
  v("pixel_acc", r.pixel_acc);
  v("hausdorff", r.hausdorff);
  v("ece", r.ece);
  v("brier", r.brier);
  v("ece_calibrated", r.ece_calibrated);
  v("brier_calibrated", r.brier_calibrated);
  v("temperature", r.temperature);
  v("bleu4", r.bleu4);
  v("cider", r.cider);
  v("meteor", r.meteor);
  v("birads_acc", r.birads_acc);
  v("clip_score", r.clip_score);
}

const csv::Row kCaseHeader = {"case_id",     "dice",        "iou",        "pixel_acc",  "hausdorff",
                              "soft_dice",   "confidence",  "calibrated", "birads_true", "birads_pred",
                              "explanation", "neural",      "reference",  "input_png",  "truth_png",
                              "pred_png",    "heatmap_png"};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IntegrityError("metrics report: bad number for " + what + ": '" + s + "'");
  }
}

}  // namespace

const std::vector<std::string>& report_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    MetricsReport r;
    visit_summary(r, [&](const char* name, double&) { k.emplace_back(name); });
    return k;
  }();
  return keys;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "# medctx metrics report\n";
  auto copy = *this;
  visit_summary(copy, [&](const char* name, double& v) { os << name << " = " << num(v) << "\n"; });
  os << "cases = " << cases.size() << "\n\n[cases]\n" << csv::format_row(kCaseHeader) << "\n";
  for (const auto& c : cases) {
    os << csv::format_row({c.case_id, num(c.dice), num(c.iou), num(c.pixel_acc), num(c.hausdorff),
                           num(c.soft_dice), num(c.confidence), num(c.calibrated), std::to_string(c.birads_true),
                           std::to_string(c.birads_pred), c.explanation, c.neural, c.reference, c.input_png,
                           c.truth_png, c.pred_png, c.heatmap_png})
       << "\n";
  }
  return os.str();
}

MetricsReport MetricsReport::parse(const std::string& text) {
  const auto marker = text.find("\n[cases]\n");
  const std::string head = marker == std::string::npos ? text : text.substr(0, marker);
  const auto kv = KeyValueConfig::parse(head, "metrics report");
  MetricsReport r;
  visit_summary(r, [&](const char* name, double& v) {
    auto s = kv.get(name);
    if (!s) throw IntegrityError(std::string("metrics report: missing key '") + name + "'");
    v = to_double(*s, name);
  });
  if (marker == std::string::npos) return r;
  const auto rows = csv::parse(text.substr(marker + 9));
  if (rows.empty() || rows.front() != kCaseHeader) throw IntegrityError("metrics report: bad [cases] header");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != kCaseHeader.size()) throw IntegrityError("metrics report: bad case row " + std::to_string(i));
    CaseRecord c;
    c.case_id = row[0];
    c.dice = to_double(row[1], "dice");
    c.iou = to_double(row[2], "iou");
    c.pixel_acc = to_double(row[3], "pixel_acc");
    c.hausdorff = to_double(row[4], "hausdorff");
    c.soft_dice = to_double(row[5], "soft_dice");
    c.confidence = to_double(row[6], "confidence");
    c.calibrated = to_double(row[7], "calibrated");
    c.birads_true = static_cast<int>(to_double(row[8], "birads_true"));
    c.birads_pred = static_cast<int>(to_double(row[9], "birads_pred"));
    c.explanation = row[10];
    c.neural = row[11];
    c.reference = row[12];
    c.input_png = row[13];
    c.truth_png = row[14];
    c.pred_png = row[15];
    c.heatmap_png = row[16];
    r.cases.push_back(std::move(c));
  }
  return r;
}

void MetricsReport::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_text();
}

MetricsReport MetricsReport::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics report " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

}  // namespace medctx::eval
