#pragma once

#include <chrono>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "tanwb/csv.hpp"
#include "tanwb/schema.hpp"

namespace tanwb {

// Calendar date held as days since 1970-01-01.
struct Date {
    int days = 0;

    static Date from_ymd(int y, unsigned m, unsigned d)
    {
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) throw Error("invalid calendar date");
        return Date{static_cast<int>(std::chrono::sys_days{ymd}.time_since_epoch().count())};
    }

    // Strict ISO-8601 calendar date, YYYY-MM-DD.
    static std::optional<Date> parse(std::string_view s)
    {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        auto digits = [&](std::size_t pos, std::size_t len, int& out) {
            out = 0;
            for (std::size_t i = pos; i < pos + len; ++i) {
                if (s[i] < '0' || s[i] > '9') return false;
                out = out * 10 + (s[i] - '0');
            }
            return true;
        };
        int y, m, d;
        if (!digits(0, 4, y) || !digits(5, 2, m) || !digits(8, 2, d)) return std::nullopt;
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
        if (!ymd.ok()) return std::nullopt;
        return Date{static_cast<int>(std::chrono::sys_days{ymd}.time_since_epoch().count())};
    }

    std::string to_string() const
    {
        std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buf;
    }

    friend auto operator<=>(const Date&, const Date&) = default;
};

struct CaseRecord {
    std::string patient_id;
    Date exam_date;
    std::vector<std::uint16_t> states; // one state index per schema feature
    Severity outcome = Severity::Benign;
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(Schema schema) : schema_(std::move(schema)) {}

    const Schema& schema() const { return schema_; }
    const std::vector<CaseRecord>& cases() const { return cases_; }
    std::size_t size() const { return cases_.size(); }
    bool empty() const { return cases_.empty(); }
    const CaseRecord& operator[](std::size_t i) const { return cases_[i]; }

    void add(CaseRecord rec)
    {
        if (rec.states.size() != schema_.feature_count())
            throw Error("case for patient '" + rec.patient_id + "' has " + std::to_string(rec.states.size()) +
                        " feature states, schema has " + std::to_string(schema_.feature_count()));
        for (std::size_t f = 0; f < rec.states.size(); ++f)
            if (rec.states[f] >= schema_.feature(f).state_count())
                throw Error("case for patient '" + rec.patient_id + "': state index " +
                            std::to_string(rec.states[f]) + " out of range for '" + schema_.feature(f).name + "'");
        cases_.push_back(std::move(rec));
    }

    // Replace a case's outcome; used by the biopsy-episode join.
    void set_outcome(std::size_t i, Severity s) { cases_.at(i).outcome = s; }

    Dataset subset(const std::vector<std::size_t>& indices) const
    {
        Dataset out(schema_);
        out.cases_.reserve(indices.size());
        for (std::size_t i : indices) out.cases_.push_back(cases_.at(i));
        return out;
    }

    // Feature index of the age-group variable, when the schema has one.
    std::optional<std::size_t> age_group_feature() const { return schema_.feature_index("Age Group"); }

private:
    Schema schema_;
    std::vector<CaseRecord> cases_;
};

struct ParseOptions {
    // Accept an empty outcome cell (filled later from biopsy events); such
    // rows get Benign and are reported in `unresolved_rows`.
    bool allow_empty_outcome = false;
    std::vector<std::size_t>* unresolved_rows = nullptr;
};

// Reads the case CSV: patient_id, exam_date, one column per feature, outcome.
// Column order is free; every column must be known and present exactly once.
inline Dataset parse_dataset(std::istream& in, const Schema& schema, ParseOptions opts = {})
{
    csv::Reader reader(in);
    csv::Row header;
    if (!reader.next(header)) throw Error("dataset: empty input (no header row)");

    const std::size_t nf = schema.feature_count();
    std::vector<long> feature_col(nf, -1);
    long pid_col = -1, date_col = -1, outcome_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        long* slot = nullptr;
        if (name == "patient_id") slot = &pid_col;
        else if (name == "exam_date") slot = &date_col;
        else if (name == "outcome") slot = &outcome_col;
        else if (auto f = schema.feature_index(name)) slot = &feature_col[*f];
        else throw Error("dataset: unknown column '" + name + "'");
        if (*slot != -1) throw Error("dataset: duplicate column '" + name + "'");
        *slot = static_cast<long>(c);
    }
    if (pid_col < 0) throw Error("dataset: missing column 'patient_id'");
    if (date_col < 0) throw Error("dataset: missing column 'exam_date'");
    if (outcome_col < 0) throw Error("dataset: missing column 'outcome'");
    for (std::size_t f = 0; f < nf; ++f)
        if (feature_col[f] < 0) throw Error("dataset: missing column '" + schema.feature(f).name + "'");

    Dataset ds(schema);
    csv::Row row;
    std::size_t data_row = 0;
    while (reader.next(row)) {
        ++data_row;
        const std::string where = "dataset row " + std::to_string(data_row) + " (line " +
                                  std::to_string(reader.line()) + ")";
        if (row.size() == 1 && row[0].empty()) continue; // blank line
        if (row.size() != header.size())
            throw Error(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                        std::to_string(row.size()));
        CaseRecord rec;
        rec.patient_id = row[pid_col];
        if (rec.patient_id.empty()) throw Error(where + ", column 'patient_id': empty patient id");
        auto date = Date::parse(row[date_col]);
        if (!date) throw Error(where + ", column 'exam_date': malformed date '" + row[date_col] + "'");
        rec.exam_date = *date;
        rec.states.resize(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            const Variable& var = schema.feature(f);
            const std::string& cell = row[feature_col[f]];
            std::optional<std::size_t> idx;
            if (cell.empty()) {
                idx = var.missing_state();
                if (!idx)
                    throw Error(where + ", column '" + var.name + "': empty cell and the variable has no 'missing' state");
            } else {
                idx = var.state_index(cell);
                if (!idx) throw Error(where + ", column '" + var.name + "': unknown state '" + cell + "'");
            }
            rec.states[f] = static_cast<std::uint16_t>(*idx);
        }
        const std::string& oc = row[outcome_col];
        if (oc.empty() && opts.allow_empty_outcome) {
            if (opts.unresolved_rows) opts.unresolved_rows->push_back(ds.size());
        } else {
            auto sev = parse_severity(oc);
            if (!sev)
                throw Error(where + ", column 'outcome': unknown outcome '" + oc +
                            "' (expected Benign|LG|IntG|HG|Invasive)");
            rec.outcome = *sev;
        }
        ds.add(std::move(rec));
    }
    return ds;
}

inline Dataset load_dataset_file(const std::string& path, const Schema& schema, ParseOptions opts = {})
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open data file '" + path + "'");
    return parse_dataset(in, schema, opts);
}

inline void render_dataset_csv(std::ostream& out, const Dataset& ds)
{
    const Schema& schema = ds.schema();
    csv::Row header{"patient_id", "exam_date"};
    for (std::size_t f = 0; f < schema.feature_count(); ++f) header.push_back(schema.feature(f).name);
    header.push_back("outcome");
    csv::write_row(out, header);
    csv::Row row;
    for (const auto& rec : ds.cases()) {
        row.clear();
        row.push_back(rec.patient_id);
        row.push_back(rec.exam_date.to_string());
        for (std::size_t f = 0; f < schema.feature_count(); ++f)
            row.push_back(schema.feature(f).states[rec.states[f]]);
        row.push_back(std::string(to_string(rec.outcome)));
        csv::write_row(out, row);
    }
}

// ---------------------------------------------------------------------------
// Biopsy episodes

enum class BreastSide { left, right };

struct BiopsyEvent {
    std::string patient_id;
    BreastSide side = BreastSide::left;
    Date date;
    Severity severity = Severity::Benign;
};

struct Episode {
    std::string patient_id;
    BreastSide side = BreastSide::left;
    Date start;
    Severity label = Severity::Benign;
};

// An episode of care spans this many days from its first biopsy, inclusive.
inline constexpr int kEpisodeWindowDays = 183;

// Clusters one (patient, side) event list into episodes. Each episode is
// anchored at its earliest event and absorbs every later event within the
// window; its label is the most severe finding.
inline std::vector<Episode> group_episodes(std::vector<BiopsyEvent> events)
{
    std::vector<Episode> out;
    if (events.empty()) return out;
    for (const auto& e : events)
        if (e.patient_id != events.front().patient_id || e.side != events.front().side)
            throw Error("group_episodes: events span more than one patient/breast side");
    std::stable_sort(events.begin(), events.end(),
                     [](const BiopsyEvent& a, const BiopsyEvent& b) { return a.date < b.date; });
    for (const auto& e : events) {
        if (out.empty() || e.date.days - out.back().start.days > kEpisodeWindowDays) {
            out.push_back(Episode{e.patient_id, e.side, e.date, e.severity});
        } else if (rank(e.severity) > rank(out.back().label)) {
            out.back().label = e.severity;
        }
    }
    return out;
}

// Label of the episode that opens with the earliest event.
inline Severity resolve_episode_label(const std::vector<BiopsyEvent>& events)
{
    if (events.empty()) throw Error("resolve_episode_label: empty event list");
    return group_episodes(events).front().label;
}

inline std::vector<BiopsyEvent> parse_biopsy_events(std::istream& in)
{
    csv::Reader reader(in);
    csv::Row header;
    if (!reader.next(header)) throw Error("biopsy events: empty input");
    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
    for (const char* need : {"patient_id", "breast_side", "date", "severity"})
        if (!col.count(need)) throw Error(std::string("biopsy events: missing column '") + need + "'");
    if (col.size() != 4) throw Error("biopsy events: unexpected extra columns");

    std::vector<BiopsyEvent> out;
    csv::Row row;
    std::size_t n = 0;
    while (reader.next(row)) {
        ++n;
        if (row.size() == 1 && row[0].empty()) continue;
        const std::string where = "biopsy events row " + std::to_string(n);
        if (row.size() != header.size()) throw Error(where + ": wrong field count");
        BiopsyEvent e;
        e.patient_id = row[col["patient_id"]];
        const std::string& side = row[col["breast_side"]];
        if (side == "left") e.side = BreastSide::left;
        else if (side == "right") e.side = BreastSide::right;
        else throw Error(where + ", column 'breast_side': expected left or right, got '" + side + "'");
        auto d = Date::parse(row[col["date"]]);
        if (!d) throw Error(where + ", column 'date': malformed date '" + row[col["date"]] + "'");
        e.date = *d;
        auto sev = parse_severity(row[col["severity"]]);
        if (!sev) throw Error(where + ", column 'severity': unknown severity '" + row[col["severity"]] + "'");
        e.severity = *sev;
        out.push_back(std::move(e));
    }
    return out;
}

// Joins biopsy events to exams. An exam takes the most severe label over the
// episodes of its patient (either side) that open on or after the exam date
// and within one episode window of it. Returns indices of exams left without
// a matching episode; their outcome is unchanged.
inline std::vector<std::size_t> attach_episode_outcomes(Dataset& ds, const std::vector<BiopsyEvent>& events)
{
    std::map<std::pair<std::string, int>, std::vector<BiopsyEvent>> by_key;
    for (const auto& e : events) by_key[{e.patient_id, static_cast<int>(e.side)}].push_back(e);
    std::map<std::string, std::vector<Episode>> episodes;
    for (auto& [key, list] : by_key) {
        auto eps = group_episodes(list);
        auto& dst = episodes[key.first];
        dst.insert(dst.end(), eps.begin(), eps.end());
    }
    std::vector<std::size_t> unmatched;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& rec = ds[i];
        auto it = episodes.find(rec.patient_id);
        std::optional<Severity> best;
        if (it != episodes.end()) {
            for (const auto& ep : it->second) {
                int lag = ep.start.days - rec.exam_date.days;
                if (lag < 0 || lag > kEpisodeWindowDays) continue;
                if (!best || rank(ep.label) > rank(*best)) best = ep.label;
            }
        }
        if (best) ds.set_outcome(i, *best);
        else unmatched.push_back(i);
    }
    return unmatched;
}

} // namespace tanwb
