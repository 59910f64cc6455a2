# Functions relating to output folders and the file names dslashsuite writes into them

import os
import re
import numpy as np

MANIFEST = 'manifest.json'

def subdir(folder, name):
    """ Make a subdirectory in the specified folder, if it doesn't already exist"""
    subpath = os.path.join(folder,name)
    if not os.path.exists(subpath):
        try:
            os.makedirs(subpath)
        except OSError:
            if not os.path.exists(subpath):
                raise
    return subpath

def outdir(folder):
    """ Make the output folder itself (and any parents), if it doesn't already exist """
    parent, name = os.path.split(os.path.abspath(folder))
    return subdir(parent, name)

def listfields(folder, prefix = 'gauge'):
    """ Get a sorted list of full path filenames for all files 'gaugeXXX.dsf(.gz)' (for prefix = 'gauge') in a folder, sorted by number XXX

    Inputs:
       folder: a file path to the folder, e.g. "runs/hot42", which contains field files
       prefix: string with which the filename starts, e.g. 'psi' to return files matching '.../psi*.dsf'
    Outputs:
       fns: a list of (sorted) full paths, e.g. fns = ['runs/hot42/gauge.dsf', 'runs/hot42/gauge1.dsf', 'runs/hot42/gauge10.dsf']
    """

    fns = [] # Will store the list of filenames
    nums = [] # Will store a list of the XXX numbers in 'gaugeXXX.dsf'

    pattern = r'^(' + re.escape(prefix) + r')(\d*?)(\.dsf)(\.gz){0,1}$'
    # If prefix = 'gauge', matches 'gauge.dsf', 'gaugeXXX.dsf' and 'gaugeXXX.dsf.gz'. A missing number sorts first.

    for name in os.listdir(folder):
        m = re.search(pattern, name)
        if m:
            fns.append(os.path.join(folder, name))
            nums.append(int(m.group(2)) if m.group(2) else -1)

    idx = np.argsort(nums, kind='stable')
    fns = np.array(fns, dtype=object)[idx].tolist()
    return fns

def manifest_path(folder):
    return os.path.join(folder, MANIFEST)
