#!/usr/bin/env python3
"""Regenerate include/ensembleguard/taxonomy_data.hpp from data/taxonomy/*.txt."""
import pathlib

root = pathlib.Path(__file__).resolve().parent.parent
out = ['#pragma once', '', '// Generated from data/taxonomy/*.txt; tests check the two stay identical.', '',
       '#include <string_view>', '', 'namespace ensembleguard::taxonomy_data {', '']
for name, ident in [('nsl-kdd', 'kNslKdd'), ('unsw-nb15', 'kUnswNb15'), ('cic-ids-2017', 'kCicIds2017')]:
    txt = (root / 'data' / 'taxonomy' / f'{name}.txt').read_text()
    out.append(f'inline constexpr std::string_view {ident} = R"TAXONOMY({txt})TAXONOMY";')
    out.append('')
out.append('}  // namespace ensembleguard::taxonomy_data')
(root / 'include' / 'ensembleguard' / 'taxonomy_data.hpp').write_text('\n'.join(out) + '\n')
