#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tanwb/common.hpp"

namespace tanwb::csv {

using Row = std::vector<std::string>;

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
// Lines starting with '#' outside quotes are provenance comments and skipped;
// they are collected in `comments` when a sink is given.
class Reader {
public:
    explicit Reader(std::istream& in, std::vector<std::string>* comments = nullptr)
        : in_(in), comments_(comments) {}

    // Returns false at end of input. `line()` is the 1-based physical line of
    // the row just read.
    bool next(Row& row)
    {
        row.clear();
        std::string field;
        bool in_quotes = false;
        bool any = false;
        bool at_row_start = true;
        int c;
        while ((c = in_.get()) != EOF) {
            if (at_row_start) {
                ++physical_line_;
                row_line_ = physical_line_;
                at_row_start = false;
                if (c == '#') {
                    std::string comment;
                    std::getline(in_, comment);
                    if (comments_) comments_->push_back(comment);
                    at_row_start = true;
                    continue;
                }
            }
            any = true;
            if (in_quotes) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        field.push_back('"');
                        in_.get();
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (c == '\n') ++physical_line_;
                    field.push_back(static_cast<char>(c));
                }
                continue;
            }
            if (c == '"') {
                in_quotes = true;
            } else if (c == ',') {
                row.push_back(std::move(field));
                field.clear();
            } else if (c == '\r') {
                // swallowed; '\n' ends the row
            } else if (c == '\n') {
                row.push_back(std::move(field));
                return true;
            } else {
                field.push_back(static_cast<char>(c));
            }
        }
        if (in_quotes) throw Error("csv: unterminated quoted field starting on line " + std::to_string(row_line_));
        if (!any) return false;
        row.push_back(std::move(field));
        return true;
    }

    std::size_t line() const { return row_line_; }

private:
    std::istream& in_;
    std::vector<std::string>* comments_;
    std::size_t physical_line_ = 0;
    std::size_t row_line_ = 0;
};

inline std::string quote(const std::string& field)
{
    if (field.find_first_of(",\"\n\r") == std::string::npos && (field.empty() || field[0] != '#'))
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& out, const Row& row)
{
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << quote(row[i]);
    }
    out << '\n';
}

} // namespace tanwb::csv
