#include "fipgemm/params.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fipgemm {

void BlockingParams::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("blocking params: " + what); };
    if (mr < 1 || nr < 1 || kc < 1) fail("mr, nr, kc must be >= 1");
    if (mr > kMaxRegisterBlock || nr > kMaxRegisterBlock)
        fail("register block exceeds kernel limit of " + std::to_string(kMaxRegisterBlock));
    if (mc < 1 || mc % mr != 0) fail("mc must be a positive multiple of mr");
    if (nc < 1 || nc % nr != 0) fail("nc must be a positive multiple of nr");
    if (l1_bytes < 1 || l2_bytes < 1 || l3_bytes < 1 || line_bytes < 1)
        fail("cache sizes must be >= 1 byte");
}

std::vector<std::string> BlockingParams::warnings() const {
    std::vector<std::string> w;
    if (mr * nr > kMicrotileRegisterBudget)
        w.push_back("microtile " + std::to_string(mr) + "x" + std::to_string(nr) +
                    " exceeds the declared register budget of " +
                    std::to_string(kMicrotileRegisterBudget) + " doubles");
    return w;
}

PackingDecision decide_packing(index_t m, index_t n, const MatrixView& a,
                               const BlockingParams& params) {
    PackingDecision d;
    d.pack_a = n > params.nr;
    d.pack_b = m > params.mr;

    if (d.pack_a) {
        const index_t eb = static_cast<index_t>(sizeof(double));
        if (a.col_major()) {
            // csb(A) * kc: bytes touched per L2-resident depth panel.
            if (a.col_stride * eb * params.kc <= params.l2_bytes) d.pack_a = false;
        } else if (a.row_major()) {
            if (params.mc * a.row_stride * eb <= params.l2_bytes) d.pack_a = false;
        }
    }
    return d;
}

BlockingParams default_params(ParamProfile profile) {
    BlockingParams p;
    switch (profile) {
        case ParamProfile::generic_large:
            p = BlockingParams{6, 8, 72, 4080, 256, 32768, 1048576, 33554432, 64};
            break;
        case ParamProfile::generic_small:
            p = BlockingParams{4, 4, 48, 512, 128, 32768, 1048576, 33554432, 64};
            break;
    }
    p.validate();
    return p;
}

BlockingParams parse_params(const std::string& text) {
    std::map<std::string, index_t*> fields;
    BlockingParams p;
    fields["mr"] = &p.mr;
    fields["nr"] = &p.nr;
    fields["mc"] = &p.mc;
    fields["nc"] = &p.nc;
    fields["kc"] = &p.kc;
    fields["l1"] = &p.l1_bytes;
    fields["l2"] = &p.l2_bytes;
    fields["l3"] = &p.l3_bytes;
    fields["line"] = &p.line_bytes;

    auto trim = [](std::string s) {
        const char* ws = " \t\r\n";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(ws);
        return s.substr(b, e - b + 1);
    };

    std::map<std::string, bool> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("params line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto it = fields.find(key);
        if (it == fields.end())
            throw std::invalid_argument("params line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (seen[key])
            throw std::invalid_argument("params line " + std::to_string(lineno) + ": repeated key '" + key + "'");
        seen[key] = true;
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(val, &pos);
            if (pos != val.size() || v < 0) throw std::invalid_argument(val);
            *it->second = static_cast<index_t>(v);
        } catch (const std::exception&) {
            throw std::invalid_argument("params line " + std::to_string(lineno) + ": bad value '" + val + "'");
        }
    }
    for (const auto& [key, ptr] : fields) {
        (void)ptr;
        if (!seen[key]) throw std::invalid_argument("params: missing key '" + key + "'");
    }
    p.validate();
    return p;
}

BlockingParams load_params(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("params: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_params(ss.str());
}

}  // namespace fipgemm
