public class MountCommand {
    private final FileSystemMaster mFileSystem;

    public MountCommand(FileSystemMaster fileSystem) {
        mFileSystem = fileSystem;
    }

    public int run(AlluxioURI alluxioPath, AlluxioURI ufsPath) throws IOException {
        mFileSystem.mount(alluxioPath, ufsPath, MountOptions.defaults());
        return 0;
    }
}
