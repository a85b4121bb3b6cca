#pragma once

// Minimal RFC-4180 reader/writer used by every file format in the project.

#include <copydet/error.hpp>

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace copydet::csv {

struct Record {
    std::vector<std::string> fields;
    std::size_t line = 0;  // line on which the record starts
};

class Reader {
  public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Next record, or nullopt at end of input. Blank lines are skipped.
    std::optional<Record> next()
    {
        while (true) {
            if (in_.peek() == std::char_traits<char>::eof()) {
                return std::nullopt;
            }
            Record rec;
            rec.line = line_;
            std::string field;
            bool quoted = false;
            bool field_was_quoted = false;
            bool any = false;
            while (true) {
                int ch = in_.get();
                if (ch == std::char_traits<char>::eof()) {
                    if (quoted) {
                        throw ParseError(rec.line, "unterminated quoted field");
                    }
                    break;
                }
                any = true;
                char c = static_cast<char>(ch);
                if (quoted) {
                    if (c == '"') {
                        if (in_.peek() == '"') {
                            in_.get();
                            field.push_back('"');
                        } else {
                            quoted = false;
                        }
                    } else {
                        if (c == '\n') {
                            ++line_;
                        }
                        field.push_back(c);
                    }
                    continue;
                }
                if (c == '"') {
                    if (!field.empty() || field_was_quoted) {
                        throw ParseError(rec.line, "stray quote inside unquoted field");
                    }
                    quoted = true;
                    field_was_quoted = true;
                } else if (c == ',') {
                    rec.fields.push_back(std::move(field));
                    field.clear();
                    field_was_quoted = false;
                } else if (c == '\r') {
                    // tolerated before \n
                } else if (c == '\n') {
                    ++line_;
                    break;
                } else {
                    if (field_was_quoted) {
                        throw ParseError(rec.line, "text after closing quote");
                    }
                    field.push_back(c);
                }
            }
            if (!any) {
                return std::nullopt;
            }
            rec.fields.push_back(std::move(field));
            if (rec.fields.size() == 1 && rec.fields.front().empty() && !field_was_quoted) {
                continue;
            }
            return rec;
        }
    }

  private:
    std::istream& in_;
    std::size_t line_ = 1;
};

inline std::string quote(std::string_view field)
{
    bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i != 0) {
            out << ',';
        }
        out << quote(fields[i]);
    }
    out << '\n';
}

inline std::string format_double(double v, int precision = 10)
{
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

/// Writes `content` to `path` through a sibling temp file and a rename, so a
/// failed run never leaves a partial file behind.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace copydet::csv
