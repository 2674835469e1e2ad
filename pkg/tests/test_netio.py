import numpy as np
import pytest

import fairspread as fs
from fairspread.netio import extract_lcc, read_edge_list, write_labels_csv


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestReadEdgeList:
    def test_dedup_and_self_loop(self, tmp_path):
        path = write(tmp_path, "e.txt", "1 2\n2,1\n1 1\n")
        net = read_edge_list(path)
        assert net.n == 2
        assert net.m == 1

    def test_comments_and_blanks(self, tmp_path):
        path = write(tmp_path, "e.txt", "# header\n\n1 2\n# more\n3 4\n")
        net = read_edge_list(path)
        assert net.n == 4
        assert net.m == 2

    def test_malformed_line_reports_number(self, tmp_path):
        path = write(tmp_path, "e.txt", "1 2\n3 4 5\n")
        with pytest.raises(ValueError, match=":2:"):
            read_edge_list(path)

    def test_numeric_id_ordering(self, tmp_path):
        path = write(tmp_path, "e.txt", "10 2\n2 3\n")
        net = read_edge_list(path)
        assert list(net.node_ids) == ["2", "3", "10"]

    def test_labels_loaded(self, tmp_path):
        epath = write(tmp_path, "e.txt", "1 2\n2 3\n")
        lpath = write(tmp_path, "l.txt", "1 0\n2 0\n3 1\n")
        net = read_edge_list(epath, lpath)
        assert net.labels is not None
        np.testing.assert_array_equal(net.labels.c, [0, 0, 1])

    def test_label_unknown_node(self, tmp_path):
        epath = write(tmp_path, "e.txt", "1 2\n")
        lpath = write(tmp_path, "l.txt", "1 0\n2 0\n9 1\n")
        with pytest.raises(ValueError, match="unknown node"):
            read_edge_list(epath, lpath)

    def test_label_missing_node(self, tmp_path):
        epath = write(tmp_path, "e.txt", "1 2\n")
        lpath = write(tmp_path, "l.txt", "1 0\n")
        with pytest.raises(ValueError, match="no label"):
            read_edge_list(epath, lpath)


class TestExtractLcc:
    def test_connected_identity(self, tmp_path):
        path = write(tmp_path, "e.txt", "0 1\n1 2\n")
        net = read_edge_list(path)
        lcc = extract_lcc(net)
        assert lcc.n == net.n
        assert lcc.m == net.m

    def test_keeps_larger_component(self, tmp_path):
        text = "0 1\n1 2\n2 3\n3 4\n5 6\n6 7\n"
        net = read_edge_list(write(tmp_path, "e.txt", text))
        lcc = extract_lcc(net)
        assert lcc.n == 5
        assert set(lcc.node_ids) == {"0", "1", "2", "3", "4"}

    def test_tie_lowest_original_id(self, tmp_path):
        text = "3 4\n0 1\n"
        net = read_edge_list(write(tmp_path, "e.txt", text))
        lcc = extract_lcc(net)
        assert set(lcc.node_ids) == {"0", "1"}

    def test_labels_carried_over(self, tmp_path):
        epath = write(tmp_path, "e.txt", "0 1\n2 3\n3 4\n")
        lpath = write(tmp_path, "l.txt", "0 1\n1 1\n2 0\n3 0\n4 1\n")
        lcc = extract_lcc(read_edge_list(epath, lpath))
        assert lcc.n == 3
        np.testing.assert_array_equal(lcc.labels.c, [0, 0, 1])


def test_write_labels_roundtrip(tmp_path):
    epath = write(tmp_path, "e.txt", "7 8\n8 9\n")
    net = read_edge_list(epath)
    labels = fs.CommunityLabels(c=np.array([0, 1, 0]), K=2)
    out = tmp_path / "labels.csv"
    write_labels_csv(out, net, labels)
    lines = out.read_text().strip().split("\n")
    assert lines == ["node,label", "7,0", "8,1", "9,0"]
