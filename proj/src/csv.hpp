#pragma once

#include <cstdio>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace rnv::detail {

// RFC 4180 quoting for report output.
class CsvWriter {
public:
    CsvWriter(std::initializer_list<std::string> header) { row(std::vector<std::string>(header)); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << quote(cells[i]);
        }
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    static std::string quote(const std::string& cell) {
        if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
        std::string q = "\"";
        for (char c : cell) {
            if (c == '"') q.push_back('"');
            q.push_back(c);
        }
        q.push_back('"');
        return q;
    }

    std::ostringstream out_;
};

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace rnv::detail
