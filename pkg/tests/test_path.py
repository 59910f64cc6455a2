import os

from dslashsuite.path import subdir, outdir, listfields, manifest_path


def test_subdir_and_outdir(tmp_path):
    p = subdir(str(tmp_path), 'runs')
    assert os.path.isdir(p)
    assert subdir(str(tmp_path), 'runs') == p
    deep = outdir(str(tmp_path / 'a' / 'b'))
    assert os.path.isdir(deep)


def test_listfields_sorted_by_number(tmp_path):
    for name in ['gauge10.dsf', 'gauge2.dsf.gz', 'gauge.dsf', 'gauge1.dsf', 'psi1.dsf', 'gauge3.txt']:
        (tmp_path / name).write_bytes(b'')
    fns = [os.path.basename(f) for f in listfields(str(tmp_path))]
    assert fns == ['gauge.dsf', 'gauge1.dsf', 'gauge2.dsf.gz', 'gauge10.dsf']
    assert [os.path.basename(f) for f in listfields(str(tmp_path), prefix='psi')] == ['psi1.dsf']
    assert listfields(str(tmp_path), prefix='eta') == []


def test_manifest_path(tmp_path):
    assert manifest_path(str(tmp_path)) == os.path.join(str(tmp_path), 'manifest.json')
